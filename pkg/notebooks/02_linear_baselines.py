# %% [markdown]
"""
Linear baselines
================

The LMMSE equalizer is a least-squares FIR filter on a centered window of
received samples. The classical DFE adds a linear term in the past
decisions. Both are fitted in closed form from a pilot sequence at the
noise level they are evaluated at.
"""

# %%
from imdd_snn import evaluation, link, training

A = link.preset_channel("A")
stop = evaluation.StopRule(min_errors=200, max_symbols=2_000_000)

print(f"{'sigma2':>7s} {'LMMSE':>10s} {'CDFE':>10s} {'ref LMMSE':>10s} {'ref CDFE':>10s}")
for s2 in (-16.0, -18.0, -20.0):
    row = []
    for kind in ("LMMSE", "CDFE"):
        eq = training.fit_linear(kind, A, s2, 0)
        row.append(evaluation.measure_ber(eq, A, s2, seed=1, stop=stop).ber)
    refs = [evaluation.paper_reference("fig2-left", k, s2) for k in ("LMMSE", "CDFE")]
    print(f"{s2:7.1f} {row[0]:10.2e} {row[1]:10.2e} {refs[0]:10.2e} {refs[1]:10.2e}")

# %% [markdown]
"""
The feedback taps of the DFE cancel the postcursor part of the ISI, which
is why it edges out the LMMSE filter. The gain is small because the
square-law detector makes the interference partly nonlinear.
"""

# %%
cdfe = training.fit_linear("CDFE", A, -20.0, 0)
print("feedforward", cdfe.payload.feedforward.round(3))
print("feedback   ", cdfe.payload.feedback.round(3))
