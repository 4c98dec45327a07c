"""Command-line front end.

Subcommands: maskgen, attack, classify, metrics, compare, report, and
init-weights (a convenience for producing deterministic random weights, since
real weights are trained elsewhere). Exit codes: 0 on success, 2 for mask
generation failures, 3 for classifier load failures, 4 when an attack run
produced no placement candidates at all, 1 for everything else.

Data outputs carry no timestamps (reruns are byte-identical); the run manifest
is the one file that records wall-clock time. All files are written atomically
via a temp file in the target directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import re
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import attack as attack_mod
from . import metrics as metrics_mod
from .attack import AttackConfig, ATTACK_SUMMARY_HEADER, run_attack
from .classifier import CnnClassifier, default_classifier_spec, forward, load_spec, write_spec_binary, write_spec_json
from .edgeops import EdgeParams
from .errors import ImageIOError, LeafAttackError, MaskGenerationError, SpecLoadError
from .maskgen import generate_leaf_mask, make_leaf_asset
from .raster import RasterImage, SignInstance, Species, read_image, read_mask, write_image, write_mask

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MASKGEN = 2
EXIT_CLASSIFIER = 3
EXIT_NO_CANDIDATES = 4


def _fail(message: str, code: int = EXIT_ERROR) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _atomic_write(final_path, write_fn) -> None:
    """Write through a sibling temp file and rename it into place."""
    final = Path(final_path)
    final.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=final.parent, suffix=final.suffix)
    os.close(fd)
    try:
        write_fn(tmp)
        os.replace(tmp, final)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(final_path, text: str) -> None:
    _atomic_write(final_path, lambda tmp: Path(tmp).write_text(text, encoding="utf-8"))


def _atomic_write_json(final_path, doc) -> None:
    _atomic_write_text(final_path, json.dumps(doc, indent=2) + "\n")


def _atomic_write_csv(final_path, header, rows) -> None:
    def write(tmp):
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)

    _atomic_write(final_path, write)


def _add_edge_flags(parser: argparse.ArgumentParser) -> None:
    defaults = EdgeParams()
    parser.add_argument("--sigma", type=float, default=defaults.sigma, help="Gaussian blur sigma")
    parser.add_argument("--low", type=float, default=defaults.low, help="Canny low threshold")
    parser.add_argument("--high", type=float, default=defaults.high, help="Canny high threshold")
    parser.add_argument("--dilate-radius", type=int, default=defaults.dilate_radius, help="edge dilation radius")
    parser.add_argument("--dilate-iterations", type=int, default=defaults.dilate_iterations, help="edge dilation passes")
    parser.add_argument("--close-radius", type=int, default=defaults.close_radius, help="morphological closing radius")


def _edge_params(args) -> EdgeParams:
    return EdgeParams(
        sigma=args.sigma,
        low=args.low,
        high=args.high,
        dilate_radius=args.dilate_radius,
        dilate_iterations=args.dilate_iterations,
        close_radius=args.close_radius,
    )


def _mask_bbox(mask) -> tuple:
    import numpy as np

    ys, xs = np.nonzero(mask.bits)
    return (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))


def cmd_maskgen(args) -> int:
    try:
        image = read_image(args.image)
        params = _edge_params(args)
        mask = generate_leaf_mask(image, params)
    except MaskGenerationError as exc:
        return _fail(f"maskgen failed at {exc}", EXIT_MASKGEN)
    except (LeafAttackError, ValueError) as exc:
        return _fail(str(exc))
    _atomic_write(args.output, lambda tmp: write_mask(mask, tmp))
    x0, y0, x1, y1 = _mask_bbox(mask)
    print(f"mask: area={mask.area} bbox=({x0}, {y0})-({x1}, {y1}) -> {args.output}")
    return EXIT_OK


def cmd_classify(args) -> int:
    try:
        spec = load_spec(args.weights)
    except SpecLoadError as exc:
        return _fail(str(exc), EXIT_CLASSIFIER)
    try:
        image = read_image(args.image)
        probs = forward(spec, image)
    except (LeafAttackError, ValueError) as exc:
        return _fail(str(exc))
    label = spec.class_labels[probs.predicted]
    print(f"label={label} index={probs.predicted} confidence={probs.confidence_percent:.2f}%")
    if args.json:
        _atomic_write_json(
            args.json,
            {
                "label": label,
                "predicted": probs.predicted,
                "confidence_percent": probs.confidence_percent,
                "probabilities": list(probs.probs),
            },
        )
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        image = read_image(args.image)
        region = read_mask(args.region) if args.region else None
        params = _edge_params(args)
        result = metrics_mod.edge_metrics(image, region, params)
    except (LeafAttackError, ValueError) as exc:
        return _fail(str(exc))
    name = args.name or Path(args.image).stem
    if result.edge_length == 0:
        print(f"{name}: edge_length=0 (no edge pixels)")
    else:
        print(
            f"{name}: edge_length={result.edge_length} orientation={result.orientation:.2f} "
            f"intensity={result.intensity:.2f} cog=({result.cog[0]:.2f}, {result.cog[1]:.2f}) "
            f"components={result.component_count}"
        )
    if args.csv:
        _atomic_write(args.csv, lambda tmp: metrics_mod.write_metrics_csv([(name, result)], tmp))
    if args.json:
        _atomic_write_json(args.json, metrics_mod.metrics_json_dict(name, result, params))
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        baselines = metrics_mod.read_metrics_csv(args.baseline)
        adversarial = metrics_mod.read_adversarial_csv(args.adversarial)
        rows = metrics_mod.comparison_rows(baselines, adversarial)
    except (LeafAttackError, ValueError, OSError) as exc:
        return _fail(str(exc))
    _atomic_write(args.output, lambda tmp: metrics_mod.write_comparison_csv(rows, tmp))
    if args.json:
        _atomic_write_json(args.json, metrics_mod.comparison_json_dict(rows))
    print(f"compared {len(rows)} adversarial rows -> {args.output}")
    return EXIT_OK


def cmd_init_weights(args) -> int:
    spec = default_classifier_spec(args.seed)
    if args.json:
        _atomic_write(args.output, lambda tmp: write_spec_json(spec, tmp))
    else:
        _atomic_write(args.output, lambda tmp: write_spec_binary(spec, tmp))
    print(f"wrote {spec.num_classes}-class weights (seed={args.seed}) -> {args.output}")
    return EXIT_OK


def cmd_report(args) -> int:
    paths = []
    for entry in args.reports:
        p = Path(entry)
        if p.is_dir():
            paths.extend(sorted(p.glob("*_report.json")))
        else:
            paths.append(p)
    if not paths:
        return _fail("no report files found")
    rows = []
    for p in paths:
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
            best = doc.get("best")
            if best is None:
                rows.append((doc["sign"], str(doc["leaf_species"]).capitalize(), "", "", "No"))
            else:
                rows.append(
                    (
                        doc["sign"],
                        str(doc["leaf_species"]).capitalize(),
                        best["predicted_label_text"],
                        f"{best['confidence_percent']:.2f}",
                        "Yes" if best["success"] else "No",
                    )
                )
        except (OSError, KeyError, ValueError) as exc:
            return _fail(f"{p}: {exc}")
    _atomic_write_csv(args.output, ATTACK_SUMMARY_HEADER, rows)
    print(f"summarized {len(rows)} reports -> {args.output}")
    return EXIT_OK


# --- attack runs -----------------------------------------------------------


class RunConfigError(ValueError):
    pass


@dataclass
class SignEntry:
    name: str
    image: Path
    mask: Path
    label: object  # int index or label text, resolved once the classifier is loaded


@dataclass
class LeafEntry:
    species: Species
    image: Path
    mask: Path | None


@dataclass
class RunConfig:
    ratios: tuple
    angles: tuple
    stride: int
    seed: int
    bbox_containment: bool
    edge: EdgeParams
    weights: Path
    output_dir: Path
    signs: list
    leaves: list
    log_candidates: bool


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise RunConfigError(f"{what} does not exist: {path}")
    return path


def load_run_config(path: Path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise RunConfigError(str(exc)) from exc
    except tomllib.TOMLDecodeError as exc:
        raise RunConfigError(f"{path}: {exc}") from exc
    base = path.parent

    atk = doc.get("attack", {})
    edge = doc.get("edge", {})
    io = doc.get("io", {})
    try:
        edge_params = EdgeParams(
            sigma=float(edge.get("sigma", 1.4)),
            low=float(edge.get("low", 50.0)),
            high=float(edge.get("high", 150.0)),
            dilate_radius=int(edge.get("dilate_radius", 1)),
            dilate_iterations=int(edge.get("dilate_iterations", 2)),
            close_radius=int(edge.get("close_radius", 2)),
        )
    except ValueError as exc:
        raise RunConfigError(f"[edge]: {exc}") from exc

    if "weights" not in io:
        raise RunConfigError("[io] must set 'weights'")
    weights = _require_file(_resolve(base, str(io["weights"])), "weights file")
    output_dir = _resolve(base, str(io.get("output_dir", "out")))

    signs = []
    for i, entry in enumerate(doc.get("signs", [])):
        try:
            name = str(entry["name"])
            image = _require_file(_resolve(base, str(entry["image"])), f"sign {name!r} image")
            mask = _require_file(_resolve(base, str(entry["mask"])), f"sign {name!r} mask")
            label = entry["label"]
        except KeyError as exc:
            raise RunConfigError(f"[[signs]] entry {i}: missing key {exc}") from exc
        signs.append(SignEntry(name=name, image=image, mask=mask, label=label))
    if not signs:
        raise RunConfigError("config needs at least one [[signs]] entry")

    leaves = []
    for i, entry in enumerate(doc.get("leaves", [])):
        try:
            species = Species(str(entry["species"]).lower())
        except (KeyError, ValueError) as exc:
            raise RunConfigError(
                f"[[leaves]] entry {i}: species must be one of "
                f"{[s.value for s in Species]}"
            ) from exc
        try:
            image = _require_file(_resolve(base, str(entry["image"])), f"leaf {species.value} image")
        except KeyError as exc:
            raise RunConfigError(f"[[leaves]] entry {i}: missing key {exc}") from exc
        mask = entry.get("mask")
        mask = _require_file(_resolve(base, str(mask)), f"leaf {species.value} mask") if mask else None
        leaves.append(LeafEntry(species=species, image=image, mask=mask))
    if not leaves:
        raise RunConfigError("config needs at least one [[leaves]] entry")

    return RunConfig(
        ratios=tuple(atk.get("ratios", attack_mod.DEFAULT_RATIOS)),
        angles=tuple(atk.get("angles", attack_mod.DEFAULT_ANGLES)),
        stride=int(atk.get("stride", 4)),
        seed=int(atk.get("seed", 0)),
        bbox_containment=bool(atk.get("bbox_containment", False)),
        edge=edge_params,
        weights=weights,
        output_dir=output_dir,
        signs=signs,
        leaves=leaves,
        log_candidates=bool(atk.get("log_candidates", False)),
    )


def _resolve_label(label, class_labels) -> int:
    if isinstance(label, bool):
        raise RunConfigError(f"sign label must be an index or label text, got {label!r}")
    if isinstance(label, int):
        if not 0 <= label < len(class_labels):
            raise RunConfigError(f"label index {label} out of range for {len(class_labels)} classes")
        return label
    text = str(label).strip().lower()
    for i, name in enumerate(class_labels):
        if name.lower() == text:
            return i
    raise RunConfigError(f"label {label!r} not found among the classifier's classes")


_STEM_RE = re.compile(r"[^A-Za-z0-9_.-]+")


def _stem(name: str) -> str:
    return _STEM_RE.sub("_", name).strip("_") or "unnamed"


def cmd_attack(args) -> int:
    try:
        run = load_run_config(Path(args.config))
    except RunConfigError as exc:
        return _fail(str(exc))

    try:
        spec = load_spec(run.weights)
    except SpecLoadError as exc:
        return _fail(str(exc), EXIT_CLASSIFIER)
    classify = CnnClassifier(spec)

    try:
        acfg = AttackConfig(
            classify=classify,
            patch_ratios=run.ratios,
            angles_deg=run.angles,
            grid_stride=run.stride,
            bbox_containment=run.bbox_containment,
            seed=run.seed,
        )
    except ValueError as exc:
        return _fail(f"[attack]: {exc}")

    try:
        signs = [
            SignInstance(
                name=entry.name,
                image=read_image(entry.image),
                sign_mask=read_mask(entry.mask),
                true_label=_resolve_label(entry.label, spec.class_labels),
            )
            for entry in run.signs
        ]
    except (RunConfigError, ImageIOError, ValueError) as exc:
        return _fail(str(exc))

    leaves = []
    for entry in run.leaves:
        try:
            leaves.append(make_leaf_asset(entry.species, entry.image, entry.mask, run.edge))
        except MaskGenerationError as exc:
            return _fail(f"leaf {entry.species.value}: mask generation failed at {exc}", EXIT_MASKGEN)
        except (ImageIOError, ValueError) as exc:
            return _fail(f"leaf {entry.species.value}: {exc}")

    out_dir = run.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    outputs = []
    any_candidates = False
    for sign in signs:
        for leaf in leaves:
            try:
                report = run_attack(acfg, sign, leaf, edge_params=run.edge, keep_candidates=run.log_candidates)
            except (LeafAttackError, ValueError) as exc:
                return _fail(f"{sign.name} x {leaf.species.value}: {exc}")
            any_candidates = any_candidates or report.total_candidates > 0
            stem = f"{_stem(sign.name)}_{leaf.species.value}"
            report_path = out_dir / f"{stem}_report.json"
            _atomic_write_json(report_path, report.to_json_dict())
            outputs.append(str(report_path))
            if report.best is not None:
                adv = attack_mod.composite_candidate(report.best.candidate, sign, leaf)
                adv_path = out_dir / f"{stem}_adv.png"
                _atomic_write(adv_path, lambda tmp, img=adv: write_image(img, tmp))
                outputs.append(str(adv_path))
            rows.append(report.summary_row())
            best_text = (
                f"best={report.summary_row()[2]} {report.summary_row()[3]}%"
                if report.best is not None
                else "no candidates"
            )
            print(
                f"{sign.name} x {leaf.species.value}: {report.total_candidates} candidates, "
                f"{report.successful_candidates} successful, {best_text}"
            )

    summary_path = out_dir / "summary.csv"
    _atomic_write_csv(summary_path, ATTACK_SUMMARY_HEADER, rows)
    outputs.append(str(summary_path))

    manifest = {
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "config": str(Path(args.config).resolve()),
        "weights": str(run.weights),
        "parameters": {"attack": acfg.params_dict(), "edge": run.edge.as_dict()},
        "signs": [{"name": s.name, "image": str(s.image), "mask": str(s.mask)} for s in run.signs],
        "leaves": [
            {"species": l.species.value, "image": str(l.image), "mask": str(l.mask) if l.mask else None}
            for l in run.leaves
        ],
        "outputs": outputs,
    }
    _atomic_write_json(out_dir / "manifest.json", manifest)

    if not any_candidates:
        print("no placement candidates for any sign/leaf pair", file=sys.stderr)
        return EXIT_NO_CANDIDATES
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leafattack",
        description="Leaf-occlusion adversarial search and edge-map forensics for sign classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("maskgen", help="extract a leaf foreground mask")
    p.add_argument("image", help="leaf photograph (PNG/PGM/PPM)")
    p.add_argument("-o", "--output", required=True, help="output mask path (.pgm or .png)")
    _add_edge_flags(p)
    p.set_defaults(fn=cmd_maskgen)

    p = sub.add_parser("attack", help="run the placement search described by a TOML config")
    p.add_argument("config", help="run configuration (TOML)")
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("classify", help="classify a single image")
    p.add_argument("image")
    p.add_argument("--weights", required=True, help="classifier weights (binary or JSON)")
    p.add_argument("--json", help="also write the result as JSON")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("metrics", help="edge metrics for a single image")
    p.add_argument("image")
    p.add_argument("--region", help="restrict metrics to a mask file")
    p.add_argument("--name", help="row name (default: image stem)")
    p.add_argument("--csv", help="write a one-row baseline CSV")
    p.add_argument("--json", help="write metrics as JSON")
    _add_edge_flags(p)
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("compare", help="join adversarial metrics to baselines and emit the delta table")
    p.add_argument("--baseline", required=True, help="baseline metrics CSV")
    p.add_argument("--adversarial", required=True, help="adversarial metrics CSV with success flags")
    p.add_argument("-o", "--output", required=True, help="output comparison CSV")
    p.add_argument("--json", help="also write the comparison as JSON")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("report", help="concatenate attack reports into a summary CSV")
    p.add_argument("reports", nargs="+", help="report JSON files or directories containing them")
    p.add_argument("-o", "--output", required=True, help="output summary CSV")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("init-weights", help="write deterministic random weights for the default architecture")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="write the JSON mirror instead of binary")
    p.set_defaults(fn=cmd_init_weights)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ImageIOError as exc:
        return _fail(str(exc))


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
