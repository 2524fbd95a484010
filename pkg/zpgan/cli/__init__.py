from zpgan.cli.main import build_parser, main
