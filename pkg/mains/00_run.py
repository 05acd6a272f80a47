import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from BevSync import RunConfig, run_pipeline
from BevSync.Calc.Instances import InstanceVideo
from BevSync.Plot import InstancePlot

out = os.path.join(os.path.dirname(__file__), 'run')
report = run_pipeline(RunConfig(seed=3, X=16, Y=16, resolution=1.0, stpt_depth=2), out)
print(report)

plot = InstancePlot(InstanceVideo.load(os.path.join(out, 'instances')))
plot.draw()
plot.show()
