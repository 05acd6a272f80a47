import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from BevSync import RunConfig, bench, run_pipeline

for depth in range(1, 5):
    cfg = RunConfig(seed=0, stpt_depth=depth, cache_attention=False)
    timing = bench(cfg, repeats=1)
    report = run_pipeline(cfg, os.path.join(os.path.dirname(__file__), 'depth{0:d}'.format(depth)))
    print("depth {0:d}: {1:8d} parameters, {2:8.1f} ms, VPQ {3:.4f}".format(
        depth, timing['param_count'], timing['end_to_end_ms'], report['VPQ']))
