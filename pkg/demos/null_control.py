"""Single-trial 9-grade classification on recordings that carry no signal.

The accuracy should sit inside the binomial band around the rate expected
from predictions that ignore the truth. Run with ``python3 demos/null_control.py``.
"""

from erpaffect import pipeline, predict, synth


def main(seed: int = 0) -> None:
    cfg = synth.SynthConfig.null(seed)
    ratings, latents = synth.gen_ratings(cfg)
    feats = pipeline.extract_features(synth.gen_recordings(cfg, latents), (48,))
    for scale in ("pleasant", "arousal"):
        data = pipeline.grade_dataset(ratings, feats.trial48, scale)
        res = predict.loso(data, predict.ovr_trainer(levels=range(1, 10)), levels=range(1, 10))
        p0 = res.fold_chance_accuracy
        lo, hi = predict.binomial_band(p0, res.confusion.total)
        print(f"[{scale}] accuracy {res.pooled_accuracy:.3f}; chance {p0:.3f}, 95% band [{lo:.3f}, {hi:.3f}]; "
              f"majority rate {predict.majority_rate(res.confusion):.3f}")


if __name__ == "__main__":
    main()
