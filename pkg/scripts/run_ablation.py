# scripts/run_ablation.py
"""Synthesize a benchmark dataset in memory and print the four-variant comparison."""
import argparse

from dotenv import load_dotenv

load_dotenv()

from zpgan.config import settings  # noqa: E402
from zpgan.core.logging import configure_logging  # noqa: E402
from zpgan.data.services import split, synth_dataset  # noqa: E402
from zpgan.evaluation.schemas import EvalConfig  # noqa: E402
from zpgan.training.ablation import run_ablation, save_ablation  # noqa: E402
from zpgan.training.schemas import TrainConfig  # noqa: E402

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--seed", type=int, default=7, help="dataset seed (default: 7)")
parser.add_argument("--groups", type=int, default=64, help="conditions (default: 64)")
parser.add_argument("--per-group", type=int, default=8, help="responses per condition (default: 8)")
parser.add_argument("--epochs", type=int, default=15, help="epochs per run (default: 15)")
parser.add_argument("--runs", type=int, default=5, help="seeds per variant (default: 5)")
parser.add_argument("--out", default=None, help="where ablation_results.json goes (default: none)")
args = parser.parse_args()

configure_logging(settings.LOG_LEVEL)

dataset = synth_dataset(args.seed, args.groups, args.per_group)
train_set, test_set = split(dataset, 0.8, args.seed)
print(f"train groups: {train_set.n_groups}  test groups: {test_set.n_groups}")

table = run_ablation(train_set, test_set, TrainConfig(epochs=args.epochs), runs=args.runs, eval_config=EvalConfig())
for name, mean_ws, std_ws in table.summary():
    print(f"{name:<14} mean WS {mean_ws:.4f} +- {std_ws:.4f}")
if args.out:
    print("Saved:", save_ablation(table, args.out))
