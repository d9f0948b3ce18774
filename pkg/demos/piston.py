"""A heavy piston on an ideal gas: mass renormalization and entropy.

The gas particles bounce elastically between a wall and the piston. In the
moving frame the gas drags along a share of its mass, ``kappa = m N / 3``,
which slows the piston oscillation by ``sqrt(1 + kappa / M)`` relative to
the Born-Oppenheimer period. The lab-frame entropy swings each period while
the moving-frame entropy only creeps upward.
"""
import numpy as np

from mboa import piston as pst
from mboa.config import parse_config
from mboa.experiments import run
from mboa.report import write_outputs


def fmt(v):
    return str(v) if isinstance(v, bool) else f"{v:.4g}"

model = pst.PistonModel.from_mass_ratio(500, 5 / 12)
x0 = 1.25 * model.x_star()
sim = pst.PistonGas(model, pst.init_gas(model, x0, seed=7))
bo = pst.bo_prediction(model, x0, sim.fast_energy())
mbo = pst.mbo_prediction(model, x0)
print(f"BO period {bo.period:.4f}, moving-frame period {mbo.period:.4f}")

ts, xs = [sim.t], [sim.x]
sim.advance_to(3 * mbo.period, record=lambda s: (ts.append(s.t), xs.append(s.x)), every=20)
T, _ = pst.oscillation_period(np.array(ts), np.array(xs))
print(f"simulated period {T:.4f} after {sim.count} collisions; "
      f"ratio to BO {T / bo.period:.4f} vs sqrt(1 + kappa/M) = {np.sqrt(1 + model.kappa / model.M):.4f}")

report = run(parse_config("experiment.kind = piston_oscillation\nexperiment.seed = 4\n"))
for m in report.metrics:
    print(f"{m.name:32s} {fmt(m.value):>12}  {m.relation} {m.tolerance}  {m.note}")
print(write_outputs(report, "demos/out"))
