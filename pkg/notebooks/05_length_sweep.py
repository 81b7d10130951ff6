# %% [markdown]
"""
Fiber length sweep on channel B
===============================

Channel B runs at 1550 nm where dispersion is strong. Each network is
trained separately for every length. The sweep below covers the linear
baselines and the ANN equalizers; add ``"NF_SNN"`` and ``"SNN_DFE"`` to
``KINDS`` to include the spiking ones (about three minutes of training per
model and length on one core).

The same sweep is available from the shell::

    imdd-snn sweep-length --channel B --kinds LMMSE,CDFE,NF_ANN,ANN_DFE --lengths-km 1,2,3,4,5,6
"""

# %%
from imdd_snn import evaluation, link, training

KINDS = ("LMMSE", "CDFE", "NF_ANN", "ANN_DFE")
LENGTHS = (2.0, 4.0, 6.0)
B = link.preset_channel("B")
stop = evaluation.StopRule(min_errors=100, max_symbols=2_000_000)


def per_length(kind):
    if kind in ("LMMSE", "CDFE"):
        return lambda s2, L: training.fit_linear(kind, B.with_length(L), s2, 0)
    trained = {
        L: training.train(training.TrainConfig(channel=B.with_length(L), kind=kind, **training.DESK_RECIPE))[0]
        for L in LENGTHS
    }
    return lambda s2, L: trained[L]


plan = evaluation.SweepPlan(B, KINDS, (-21.0,), LENGTHS, stop, seed=11)
records = evaluation.sweep(plan, {k: per_length(k) for k in KINDS}, workers=1)

# %%
print(f"{'kind':8s}" + "".join(f"{L:>10.0f} km" for L in LENGTHS))
for kind in KINDS:
    row = [r for r in records if r.equalizer == kind]
    print(f"{kind:8s}" + "".join(f"{r.ber:13.2e}" for r in row))
print("reference at 6 km:", {k: evaluation.paper_reference("fig3", k, 6) for k in KINDS})
