# %% [markdown]
"""
Error propagation in decision feedback
======================================

A DFE feeds its own past decisions back. Once it makes a wrong decision,
the cancellation term is wrong too and further errors become more likely.
Replacing the decisions by the true symbols ("genie" feedback) removes
this effect. Both runs below use the same link realizations.
"""

# %%
from imdd_snn import evaluation, link, training

A = link.preset_channel("A")
stop = evaluation.StopRule(min_errors=10**9, max_symbols=1_000_000)
ann = training.train(training.TrainConfig(channel=A, kind="ANN_DFE", **training.DESK_RECIPE))[0]
for s2 in (-17.0, -20.0):
    eqs = {"CDFE": training.fit_linear("CDFE", A, s2, 0), "ANN_DFE": ann}
    for kind, eq in eqs.items():
        dec = evaluation.measure_ber(eq, A, s2, seed=3, stop=stop)
        gen = evaluation.measure_ber(eq, A, s2, seed=3, stop=stop, genie=True)
        print(f"{kind:8s} {s2:6.1f} dB  decisions {dec.ber:.2e}  genie {gen.ber:.2e}")

# %% [markdown]
"""
On channel B the feedback window is 20 symbols long and the gap is much
larger. Networks trained with teacher forcing see only correct feedback and
do not learn to recover from their own mistakes.
"""

# %%
B = link.preset_channel("B", length_km=6.0)
ann_b = training.train(training.TrainConfig(channel=B, kind="ANN_DFE", **training.DESK_RECIPE))[0]
dec = evaluation.measure_ber(ann_b, B, -21.0, seed=3, stop=stop)
gen = evaluation.measure_ber(ann_b, B, -21.0, seed=3, stop=stop, genie=True)
print(f"channel B 6 km ANN_DFE  decisions {dec.ber:.2e}  genie {gen.ber:.2e}")
