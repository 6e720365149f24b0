import argparse
import logging
import time

import pandas as pd

from TVGS.config import ExperimentConfig
from TVGS.experiments import ExperimentContext, grid_search, iteration_experiment, iteration_ordering, paired_iterations

parser = argparse.ArgumentParser(description='CG iteration counts of qiu and sobolev on shared masks')
parser.add_argument('configs', nargs='*', default=['configs/synthetic.json', 'configs/global_covid.json'])
parser.add_argument('--trials', type=int, default=100, help='Masks per density')
parser.add_argument('--output', type=str, default='benchmark_iterations.csv')
args = parser.parse_args()

logging.basicConfig(level=logging.WARNING)

verdicts = []
paired_frames = []

for config_path in args.configs:
    config = ExperimentConfig.from_file(config_path).with_overrides(trials_final=args.trials)
    print(f"\n=== {config.name} ({config_path})")
    ctx = ExperimentContext.from_config(config)

    start = time.time()
    best, _ = grid_search(ctx, "sobolev")
    table = iteration_experiment(ctx, best)
    end = time.time()

    medians, ordered = iteration_ordering(table)
    print(medians.to_string(index=False))
    print(f"sobolev never worse, strictly better at >= half of the densities: {ordered}")

    paired = paired_iterations(table)
    paired.insert(0, "dataset", config.name)
    paired_frames.append(paired)
    verdicts.append({
        "dataset": config.name,
        "nodes": ctx.graph.n_nodes,
        "steps": ctx.shape[1],
        "ordered": ordered,
        "runtime_sec": end - start,
    })

df_results = pd.concat(paired_frames, ignore_index=True)
print(df_results.head())
df_results.to_csv(args.output, index=False)
print(pd.DataFrame(verdicts).to_string(index=False))
