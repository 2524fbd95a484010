# zpgan/cli/__main__.py
from zpgan.cli.main import main

raise SystemExit(main())
