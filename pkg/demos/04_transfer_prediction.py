"""Use the published zero-shot models and few-shot log curves.

Shows the three built-in regression equations, predicts zero-shot
scores from scaled features, extends them along the s0 + alpha*ln(n+1)
curve, and ranks candidate source languages for a target.
"""

import math

from langxfer.similarity import PairFeatureVector
from langxfer.transfer import (
    FewShotCurve,
    builtin_model,
    fit_alpha,
    per_decade_gain,
    predict_n_shot,
    predict_zero_shot,
    rank_sources,
)
from langxfer.regression import TransferObservation

print("=== built-in zero-shot models (inputs scaled to [0, 1]) ===")
for task in ("qa", "ner", "xnli"):
    model = builtin_model(task)
    terms = " ".join(
        f"{coef:+g}*{name}" for name, coef in model.coefficients.items()
    )
    print(f"{task:<5} score = {model.intercept:+g} {terms}")

print("\n=== zero-shot prediction for one feature row ===")
model = builtin_model("qa")
features = {"s_src": 0.8, "synt": 0.6, "phono": 0.35, "morph": 0.4, "lm_em_tgt": 0.3}
prediction = predict_zero_shot(model, features)
print(f"features: {features}")
print(f"predicted zero-shot score: {prediction.score:.2f} "
      f"(out of range: {prediction.out_of_range})")

print("\n=== few-shot curve fitted from observations ===")
observations = [
    TransferObservation("qa", "en", "fi", n, 38.0 + 4.2 * math.log(n + 1.0))
    for n in (10, 30, 50, 100, 250)
]
curve = fit_alpha(observations, s0=38.0)
print(f"fitted slope alpha = {curve.alpha:.3f} "
      f"(gain per 10x data: {per_decade_gain(curve):.2f} points)")
for n in (0, 10, 100, 1000):
    print(f"  predicted score at n={n:<5} {predict_n_shot(curve, n):.2f}")

print("\n=== ranking candidate sources for a target ===")
def row(source, **values):
    base = dict(lex=0.5, morph=0.5, phono=0.3, synt=0.5, emb=0.5, v_r=1.0,
                sent_len=1.0, lm_l_src=-2.0, lm_l_tgt=-2.0, lm_em_src=0.5,
                lm_em_tgt=0.25, s_src=0.5)
    base.update(values)
    return PairFeatureVector(task="qa", source=source, target="sw", **base)

candidates = [
    row("en", s_src=0.95, synt=0.4),
    row("ar", s_src=0.70, synt=0.8, phono=0.45),
    row("id", s_src=0.60, synt=0.75, phono=0.4),
]
ranking = rank_sources(model, "sw", candidates)
print("zero-shot ranking for target sw:")
for rank, entry in enumerate(ranking.entries, start=1):
    print(f"  {rank}. {entry.source}  predicted {entry.score:.2f}")

curves = {
    ("en", "sw"): FewShotCurve("qa", "en", "sw", 0.0, alpha=5.0),
    ("ar", "sw"): FewShotCurve("qa", "ar", "sw", 0.0, alpha=1.0),
    ("id", "sw"): FewShotCurve("qa", "id", "sw", 0.0, alpha=1.0),
}
few = rank_sources(model, "sw", candidates, n=250, curves=curves)
print("after 250 target samples (the steep en curve narrows the gap):")
for rank, entry in enumerate(few.entries, start=1):
    print(f"  {rank}. {entry.source}  predicted {entry.score:.2f}")
