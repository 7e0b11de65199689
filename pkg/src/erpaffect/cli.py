"""Command-line entry point: simulate, fit-irt, cluster, features, train, loso, report.

Raw study files (ratings, item emotions, recordings) are read from
``--data`` (default: the output directory); artifacts of earlier subcommands
are read from ``--out``. Every subcommand writes only into ``--out`` and
leaves a ``manifest_<command>.json`` listing the content hashes of what it
read, the seed and library versions.

A config file holds one ``key = value`` pair per line; ``#`` starts a comment.
Recognised keys mirror the long options: data, out, scale, features, levels,
ridge, cap, seed, jobs, profile, target. Command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import platform
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from . import __version__, cluster, irt, pipeline, predict, synth
from .core import (
    EMOTIONS,
    SCALES,
    DataError,
    FormatError,
    load_features,
    load_item_emotions,
    load_ratings,
    load_recording,
    read_json,
    save_features,
    save_item_emotions,
    save_ratings,
    save_recording,
    write_json,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_DATA = 4

CRC_GRID = np.linspace(-4.0, 4.0, 161)


class MissingInputError(FileNotFoundError):
    pass


class UsageError(ValueError):
    pass


@dataclass
class PipelineConfig:
    data: Path | None = None
    out: Path = Path("out")
    scale: str = "both"
    features: int | None = None
    levels: int = 4
    ridge: float = predict.DEFAULT_RIDGE
    cap: int = 10
    seed: int = 0
    jobs: int = 1
    profile: str = "default"
    target: str = "levels"
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.out = Path(self.out)
        self.data = self.out if self.data is None else Path(self.data)
        if self.scale not in (*SCALES, "both"):
            raise UsageError(f"--scale must be pleasant, arousal or both, not {self.scale!r}")
        if self.features is not None and int(self.features) not in (48, 192):
            raise UsageError(f"--features must be 48 or 192, not {self.features!r}")
        if self.profile not in ("default", "high-snr", "null"):
            raise UsageError(f"unknown simulation profile {self.profile!r}")
        if self.target not in ("levels", "grades"):
            raise UsageError(f"--target must be levels or grades, not {self.target!r}")
        if not 2 <= int(self.levels) <= 8:
            raise UsageError("--levels must lie in 2..8")
        if int(self.jobs) < 1:
            raise UsageError("--jobs must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")

    @property
    def scales(self) -> tuple[str, ...]:
        return SCALES if self.scale == "both" else (self.scale,)

    # -- input tracking ----------------------------------------------------

    def need(self, name: str | Path, base: Path | None = None) -> Path:
        path = (self.data if base is None else base) / name
        if not path.exists():
            raise MissingInputError(f"missing input {path}")
        self.inputs[str(path)] = hashlib.sha256(path.read_bytes()).hexdigest()
        return path

    def optional(self, name: str | Path, base: Path | None = None) -> Path | None:
        path = (self.data if base is None else base) / name
        return self.need(name, base) if path.exists() else None


def read_config(path: Path) -> dict[str, str]:
    """Parse a ``key = value`` file into a flat dict."""
    if not path.exists():
        raise MissingInputError(f"missing config file {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",))
    try:
        parser.read_string("[pipeline]\n" + path.read_text())
    except configparser.Error as exc:
        raise FormatError(f"{path}: {exc}") from None
    known = {f.name for f in fields(PipelineConfig)} - {"inputs"}
    values = dict(parser["pipeline"])
    unknown = sorted(set(values) - known)
    if unknown:
        raise FormatError(f"{path}: unknown key(s) {', '.join(unknown)}")
    return values


def _coerce(values: dict) -> dict:
    out = dict(values)
    for key, typ in (("features", int), ("levels", int), ("cap", int), ("seed", int), ("jobs", int), ("ridge", float)):
        if out.get(key) is not None:
            try:
                out[key] = typ(out[key])
            except ValueError:
                raise UsageError(f"{key} must be {typ.__name__}, got {out[key]!r}") from None
    return out


def _manifest(cfg: PipelineConfig, command: str, outputs: Sequence[Path]) -> None:
    settings = {k: v for k, v in asdict(cfg).items() if k != "inputs"}
    settings = {k: str(v) if isinstance(v, Path) else v for k, v in settings.items()}
    write_json(
        cfg.out / f"manifest_{command}.json",
        "manifest",
        {
            "command": command,
            "seed": cfg.seed,
            "settings": settings,
            "inputs": dict(sorted(cfg.inputs.items())),
            "outputs": sorted(p.name for p in outputs),
            "versions": {
                "erpaffect": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        },
    )


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_simulate(cfg: PipelineConfig) -> list[Path]:
    """Write a synthetic study: ratings, recordings, events and ground truth."""
    make = {
        "default": lambda seed: synth.SynthConfig(seed=seed),
        "high-snr": synth.SynthConfig.high_snr,
        "null": synth.SynthConfig.null,
    }[cfg.profile]
    scfg = make(cfg.seed)
    ratings, latents = synth.gen_ratings(scfg)
    recs = synth.gen_recordings(scfg, latents)
    out = [cfg.out / "ratings.csv", cfg.out / "item_emotions.csv"]
    save_ratings(ratings, out[0])
    save_item_emotions(synth.item_emotions(scfg.design), out[1])
    for rec in recs:
        path = save_recording(rec, cfg.out)
        out += [path, cfg.out / f"events_{rec.rater_id}.csv"]
    truth = cfg.out / "truth.json"
    write_json(
        truth,
        "truth",
        {
            "profile": cfg.profile,
            "seed": cfg.seed,
            "config": asdict(scfg),
            "items": list(ratings.items),
            "latents": {s: latents[s] for s in SCALES},
            "models": {s: [m.to_dict() for m in synth.true_models(scfg, s)] for s in SCALES},
        },
    )
    return out + [truth]


def _grm_payload(fit: pipeline.ScaleFit, items: Sequence[str]) -> dict:
    raters = []
    for m, cmap in zip(fit.models, fit.maps):
        wald = irt.wald_significance(m)
        raters.append(
            {
                "model": m.to_dict(),
                "p_values": dict(zip(wald.labels, wald.p_values)),
                "not_significant": [lab for lab, flag in zip(wald.labels, wald.not_significant) if flag],
                "category_masses": irt.category_masses(m),
                "category_map": cmap.to_dict(),
            }
        )
    return {
        "scale": fit.scale,
        "converged": fit.fit.converged,
        "n_iter": fit.fit.n_iter,
        "loglik_history": fit.fit.loglik_history,
        "raters": raters,
        "scores": {"items": list(items), "eap": fit.scores, "posterior_sd": fit.score_sd},
    }


def _crc_rows(models: Sequence[irt.GrmModel]):
    for m in models:
        p = irt.crc(m, CRC_GRID)
        for x, row in zip(CRC_GRID, p):
            full = np.zeros(9)
            full[np.asarray(m.used_categories) - 1] = row
            yield [m.rater_id, float(x), *full.tolist()]


CRC_HEADER = ["rater", "x"] + [f"grade{g}" for g in range(1, 10)]


def cmd_fit_irt(cfg: PipelineConfig) -> list[Path]:
    """Fit a GRM per rater and scale; write parameters, maps, scores and CRC tables."""
    ratings = load_ratings(cfg.need("ratings.csv"))
    out = []
    for scale in cfg.scales:
        fit = pipeline.fit_scale(ratings, scale, cfg.levels)
        path = cfg.out / f"grm_{scale}.json"
        write_json(path, "grm", _grm_payload(fit, ratings.items))
        out += [path, _write_csv(cfg.out / f"crc_{scale}.csv", CRC_HEADER, _crc_rows(fit.models))]
    return out


def cmd_cluster(cfg: PipelineConfig) -> list[Path]:
    """WPGMA clustering of all Affect Grid responses into two clusters."""
    ratings = load_ratings(cfg.need("ratings.csv"))
    pts = np.column_stack([ratings.pleasant.ravel(), ratings.arousal.ravel()]).astype(float)
    cells = [(i, r) for i in ratings.items for r in ratings.raters]
    dend = cluster.wpgma(pts)
    cl = cluster.cut(dend, 2)
    rows = [
        [r, i, int(p), int(a), cl.names[lab]]
        for (i, r), (p, a), lab in zip(cells, pts, cl.labels)
    ]
    out = [_write_csv(cfg.out / "clusters.csv", ["rater", "item", "pleasant", "arousal", "cluster"], rows)]
    path = cfg.out / "dendrogram.json"
    write_json(
        path,
        "dendrogram",
        {
            "cells": [{"rater": r, "item": i} for i, r in cells],
            "dendrogram": dend.to_dict(),
            "clusters": {"names": cl.names, "shares": cl.shares, "mean_pleasant": cl.mean_pleasant},
        },
    )
    return out + [path]


def _recordings(cfg: PipelineConfig):
    paths = sorted(cfg.data.glob("recording_*.csv"))
    if not paths:
        raise MissingInputError(f"missing input {cfg.data / 'recording_<rater>.csv'}")
    recs = []
    for p in paths:
        cfg.need(p.name)
        cfg.need(p.name.replace("recording_", "events_", 1))
        recs.append(load_recording(p))
    return recs


def cmd_features(cfg: PipelineConfig) -> list[Path]:
    """Band-pass, epoch and write the 48- and 192-feature tables."""
    which = (48, 192) if cfg.features is None else (cfg.features,)
    fs = pipeline.extract_features(_recordings(cfg), which)
    out = []
    if fs.erp48 is not None:
        save_features(fs.erp48, cfg.out / "features_48.csv")
        save_features(fs.trial48, cfg.out / "features_48_trials.csv")
        out += [cfg.out / "features_48.csv", cfg.out / "features_48_trials.csv"]
    if fs.grand192 is not None:
        save_features(fs.grand192, cfg.out / "features_192.csv")
        out.append(cfg.out / "features_192.csv")
    return out


def _load_grm(cfg: PipelineConfig, scale: str, base: Path | None = None):
    doc = read_json(cfg.need(f"grm_{scale}.json", base if base is not None else cfg.out), "grm")
    models = [irt.GrmModel.from_dict(r["model"]) for r in doc["raters"]]
    maps = [irt.CategoryMap.from_dict(r["category_map"]) for r in doc["raters"]]
    scores = doc["scores"]
    return doc, models, maps, scores["items"], np.asarray(scores["eap"], float)


def _level_data(cfg: PipelineConfig, ratings, scale: str):
    if cfg.target == "grades":
        table = load_features(cfg.need("features_48_trials.csv", cfg.out))
        return pipeline.grade_dataset(ratings, table, scale), tuple(range(1, 10))
    _, _, maps, _, _ = _load_grm(cfg, scale)
    table = load_features(cfg.need("features_48.csv", cfg.out))
    return pipeline.level_dataset(ratings, maps, table, scale), tuple(range(1, cfg.levels + 1))


def _sensitivity(cfg: PipelineConfig, scale: str) -> dict:
    table = load_features(cfg.need("features_192.csv", cfg.out))
    _, _, _, items, eap = _load_grm(cfg, scale)
    y = pipeline.item_targets(table, items, eap)
    reg = predict.stepwise_select(table.matrix, y, table.keys, cap=cfg.cap)
    pred = predict.predict_sensitivity(reg, table.matrix)
    return {
        "scale": scale,
        "items": [r.item for r in table.rows],
        "measured": y,
        "predicted": pred,
        "comparison": predict.compare(y, pred).to_dict(),
        "regressor": reg.to_dict(),
    }


def _check_features_flag(cfg: PipelineConfig, allowed: tuple[int, ...], command: str) -> tuple[int, ...]:
    which = allowed if cfg.features is None else (cfg.features,)
    bad = set(which) - set(allowed)
    if bad:
        allowed_text = " or ".join(map(str, allowed))
        raise UsageError(f"{command} does not accept --features {sorted(bad)[0]} (use {allowed_text})")
    if cfg.target == "grades" and 192 in which and cfg.features == 192:
        raise UsageError("--target grades applies to the 48-feature classifier only")
    return which


def cmd_train(cfg: PipelineConfig) -> list[Path]:
    """Fit the level classifier (48) and the sensitivity regression (192) on all raters."""
    which = _check_features_flag(cfg, (48, 192), "train")
    ratings = load_ratings(cfg.need("ratings.csv"))
    out = []
    for scale in cfg.scales:
        if 48 in which:
            data, levels = _level_data(cfg, ratings, scale)
            X = np.vstack([d[0] for d in data.values()])
            y = np.concatenate([d[1] for d in data.values()])
            keys = load_features(cfg.out / ("features_48_trials.csv" if cfg.target == "grades" else "features_48.csv")).keys
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                clf = predict.fit_ovr(X, y, cfg.ridge, levels, keys)
            path = cfg.out / f"classifier_{scale}.json"
            write_json(path, "classifier", {"scale": scale, "target": cfg.target, "classifier": clf.to_dict()})
            out.append(path)
        if 192 in which:
            path = cfg.out / f"sensitivity_{scale}.json"
            write_json(path, "sensitivity", _sensitivity(cfg, scale))
            out.append(path)
    return out


def cmd_loso(cfg: PipelineConfig) -> list[Path]:
    """Leave-one-subject-out evaluation of the level classifier."""
    _check_features_flag(cfg, (48,), "loso")
    ratings = load_ratings(cfg.need("ratings.csv"))
    out = []
    for scale in cfg.scales:
        data, levels = _level_data(cfg, ratings, scale)
        res = predict.loso(data, predict.ovr_trainer(cfg.ridge, levels), levels, jobs=cfg.jobs)
        cm = res.confusion
        payload = res.to_dict()
        payload.update(
            scale=scale,
            target=cfg.target,
            majority_rate=predict.majority_rate(cm),
            binomial_band_chance=predict.binomial_band(res.fold_chance_accuracy, cm.total),
        )
        path = cfg.out / f"loso_{scale}.json"
        write_json(path, "loso", payload)
        out.append(path)
    return out


def cmd_report(cfg: PipelineConfig) -> list[Path]:
    """Deterministic report JSON, a text summary and plot-data CSVs."""
    ratings = load_ratings(cfg.need("ratings.csv"))
    emotions_path = cfg.optional("item_emotions.csv")
    emotions = load_item_emotions(emotions_path) if emotions_path else {}
    report: dict = {"scales": {}}
    out = []
    eap = {}
    for scale in cfg.scales:
        grm_doc, models, _, items, scores = _load_grm(cfg, scale)
        loso_doc = read_json(cfg.need(f"loso_{scale}.json", cfg.out), "loso")
        eap[scale] = dict(zip(items, scores.tolist()))
        sens_path = cfg.optional(f"sensitivity_{scale}.json", cfg.out)
        if sens_path is not None:
            sens = read_json(sens_path, "sensitivity")
            sens = {k: v for k, v in sens.items() if k not in ("format", "kind")}
        elif (cfg.out / "features_192.csv").exists():
            sens = _jsonable_sens(_sensitivity(cfg, scale))
        else:
            sens = None
        entry = {
            "grm": [
                {
                    "rater": r["model"]["rater"],
                    "slope": r["model"]["slope"],
                    "thresholds": r["model"]["thresholds"],
                    "threshold_labels": irt.GrmModel.from_dict(r["model"]).threshold_labels,
                    "not_significant": r["not_significant"],
                    "cuts": r["category_map"]["cuts"],
                }
                for r in grm_doc["raters"]
            ],
            "loso": {
                k: loso_doc[k]
                for k in ("raters", "accuracies", "mean_accuracy", "sd_accuracy", "pooled_accuracy",
                          "rank_correlation", "chance_accuracy", "fold_chance_accuracy", "majority_rate",
                          "binomial_band_chance", "confusion", "target")
            },
        }
        if sens is not None:
            entry["sensitivity"] = {
                "comparison": sens["comparison"],
                "r_squared": sens["regressor"]["r_squared"],
                "selected_features": sens["regressor"]["selected_features"],
            }
        report["scales"][scale] = entry

        out.append(_write_csv(cfg.out / f"plot_crc_{scale}.csv", CRC_HEADER, _crc_rows(models)))
        acc_rows = [[r, a] for r, a in zip(loso_doc["raters"], loso_doc["accuracies"])]
        acc_rows.append(["mean", loso_doc["mean_accuracy"]])
        out.append(_write_csv(cfg.out / f"plot_accuracy_{scale}.csv", ["rater", "accuracy"], acc_rows))
        if sens is not None:
            out.append(
                _write_csv(
                    cfg.out / f"plot_sensitivity_{scale}.csv",
                    ["item", "measured", "predicted"],
                    zip(sens["items"], map(float, sens["measured"]), map(float, sens["predicted"])),
                )
            )

    counts: dict[tuple[int, int], int] = {}
    for p, a in zip(ratings.pleasant.ravel(), ratings.arousal.ravel()):
        counts[(int(p), int(a))] = counts.get((int(p), int(a)), 0) + 1
    out.append(
        _write_csv(
            cfg.out / "plot_affect_grid.csv",
            ["pleasant", "arousal", "count"],
            ([p, a, c] for (p, a), c in sorted(counts.items())),
        )
    )

    if emotions and len(eap) == 2:
        cats = [e for e in EMOTIONS if e in set(emotions.values())]
        profile = predict.emotion_profile(eap["pleasant"], eap["arousal"], emotions, cats)
        report["emotion_profile"] = [s.to_dict() for s in profile]
        out.append(
            _write_csv(
                cfg.out / "plot_emotion_polygon.csv",
                ["emotion", "pleasant_mean", "pleasant_se", "arousal_mean", "arousal_se"],
                ([s.emotion, s.pleasant_mean, s.pleasant_se, s.arousal_mean, s.arousal_se] for s in profile),
            )
        )

    path = cfg.out / "report.json"
    write_json(path, "report", report)
    out.append(path)
    out.append(_write_summary(cfg.out / "summary.txt", report))
    return out


def _jsonable_sens(sens: dict) -> dict:
    sens = dict(sens)
    sens["measured"] = np.asarray(sens["measured"]).tolist()
    sens["predicted"] = np.asarray(sens["predicted"]).tolist()
    return sens


def _write_summary(path: Path, report: dict) -> Path:
    lines = []
    for scale, e in report["scales"].items():
        lo = e["loso"]
        lines.append(f"[{scale}]")
        lines.append(
            f"  LOSO accuracy {lo['mean_accuracy']:.3f} (sd {lo['sd_accuracy']:.3f}), "
            f"pooled {lo['pooled_accuracy']:.3f}, chance {lo['chance_accuracy']:.3f}"
        )
        if lo["rank_correlation"] is not None:
            lines.append(f"  rank correlation {lo['rank_correlation']:.3f}")
        for r, a in zip(lo["raters"], lo["accuracies"]):
            lines.append(f"    {r:>8s} {a:.3f}")
        if "sensitivity" in e:
            s = e["sensitivity"]
            lines.append(f"  sensitivity r {s['comparison']['pearson_r']:.3f}, R^2 {s['r_squared']:.3f}")
            lines.append(f"  selected: {', '.join(s['selected_features']) or '(none)'}")
    for s in report.get("emotion_profile", []):
        lines.append(
            f"  {s['emotion']:<10s} pleasant {s['pleasant_mean']:+.2f} +/- {s['pleasant_se']:.2f}  "
            f"arousal {s['arousal_mean']:+.2f} +/- {s['arousal_se']:.2f}"
        )
    path.write_text("\n".join(lines) + "\n")
    return path


COMMANDS = {
    "simulate": cmd_simulate,
    "fit-irt": cmd_fit_irt,
    "cluster": cmd_cluster,
    "features": cmd_features,
    "train": cmd_train,
    "loso": cmd_loso,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erpaffect", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--out", type=Path, help="output directory (default ./out)")
    common.add_argument("--data", type=Path, help="input directory (default: the output directory)")
    common.add_argument("--scale", choices=(*SCALES, "both"))
    common.add_argument("--features", type=int, choices=(48, 192))
    common.add_argument("--levels", type=int, help="collapsed scale size (default 4)")
    common.add_argument("--ridge", type=float, help="ridge penalty on standardized features")
    common.add_argument("--cap", type=int, help="maximum stepwise features")
    common.add_argument("--jobs", type=int, help="parallel LOSO folds")
    common.add_argument("--profile", choices=("default", "high-snr", "null"), help="simulate: synthetic study")
    common.add_argument("--target", choices=("levels", "grades"), help="classify collapsed levels or raw single-trial grades")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMANDS[name].__doc__)
    return parser


def make_config(args: argparse.Namespace) -> PipelineConfig:
    values = read_config(args.config) if args.config else {}
    for f in fields(PipelineConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return PipelineConfig(**_coerce(values))


def run(command: str, cfg: PipelineConfig) -> list[Path]:
    cfg.out.mkdir(parents=True, exist_ok=True)
    outputs = COMMANDS[command](cfg)
    _manifest(cfg, command, outputs)
    return outputs


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        outputs = run(args.command, cfg)
    except MissingInputError as exc:
        print(f"erpaffect {args.command}: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except UsageError as exc:
        print(f"erpaffect {args.command}: invalid options: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, irt.DegenerateRaterError) as exc:
        print(f"erpaffect {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for p in outputs:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
