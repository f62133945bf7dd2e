#!/usr/bin/env python3
"""Fractal Lab - experiment runner for dyadic entropy, self-similar measures and free semigroups.

Each subcommand builds its inputs from flags, an optional JSON config file and
FRACTAL_LAB_* environment variables (flags win over the file, the file over
the environment), writes CSV/JSON artifacts to the output directory and pairs
them with a run manifest.

Examples:
    python scripts/fractal_lab.py edim --ifs "1/3,0;1/3,2/3" --p "1/2,1/2" --n 20
    python scripts/fractal_lab.py free-check --maps "a=(1+sqrt5)/2,b=0;a=(1+sqrt5)/2,b=1" --L 3
    python scripts/fractal_lab.py simdim --ratios "1/2,1/2"
"""

import argparse
import json
import logging
import math
import platform
import sys
from importlib import metadata
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from attractor import (
    DEFAULT_GRID_EXPONENT,
    FamilySpec,
    attractor_cells,
    box_dim_estimate,
    cantor_copies_union,
    dimension_table,
    porosity_constant,
    porous_entropy_bound,
    save_cells,
    similarity_dimension,
    sinusoidal_ratio_rule,
)
from convolution import act_convolve, convolve_R, entropy_growth_experiment
from dyadic_entropy import entropy_dim_estimate, entropy_porosity_test, max_component_entropy, sweep_table
from env_loader import get_env_int, get_env_var, load_env_from_base
from exact_scalar import parse_exact
from freeness import (
    DEFAULT_STATE_CAP,
    ExactAffineMap,
    check_free,
    eval_word,
    greedy_free_extension,
    parse_maps,
    relation_certificate,
    relation_solution_set,
)
from measure_core import (
    AffineMap,
    DyadicMeasure1D,
    DyadicMeasureG,
    PreconditionError,
    load_measure,
    save_measure,
)
from stationary import FiniteSampler, SamplerSpec, WeightedIFS, self_similar_measure, stationarity_residual, stationary_measure

logger = logging.getLogger(__name__)

COMMANDS = (
    "entropy",
    "edim",
    "porosity",
    "convolve",
    "act",
    "growth",
    "stationary",
    "selfsim",
    "attractor",
    "boxdim",
    "simdim",
    "porous-set",
    "cantor-copies",
    "free-check",
    "relation-solve",
    "free-extend",
)

GROUP_SAMPLE_POINTS = 4096

ENV_KEYS = {
    "seed": "FRACTAL_LAB_SEED",
    "workers": "FRACTAL_LAB_WORKERS",
    "state_cap": "FRACTAL_LAB_STATE_CAP",
    "grid_exponent": "FRACTAL_LAB_GRID_EXPONENT",
}


class BoxFamily(BaseModel):
    """A compact box of maps x -> a x + t, discretized on a 2^-g grid."""

    ratio_range: tuple[float, float] = Field(..., description="Range [r0, r1] of ratios inside (0, 1).")
    t_range: tuple[float, float] = Field(..., description="Range [t0, t1] of translations.")
    grid_exponent: Optional[int] = Field(None, ge=1, le=16, description="Grid step 2^-g; defaults to the run setting.")


class ExperimentConfig(BaseModel):
    """Merged run configuration."""

    command: str = Field(..., description="Subcommand to run.")
    n: int = Field(16, ge=1, le=26, description="Dyadic resolution level.")
    m: int = Field(4, ge=1, description="Refinement depth for component entropies.")
    levels: Optional[tuple[int, int]] = Field(None, description="Inclusive level range a..b.")
    seed: int = Field(0, ge=0, description="Master seed of all random streams.")
    samples: int = Field(1_000_000, ge=1, description="Monte-Carlo sample count.")
    workers: int = Field(1, ge=1, description="Worker threads.")
    out: Path = Field(Path("output"), description="Output directory.")
    log_level: str = Field("INFO", description="Logging level name.")
    state_cap: int = Field(DEFAULT_STATE_CAP, ge=1, description="Word enumeration cap.")
    grid_exponent: int = Field(DEFAULT_GRID_EXPONENT, ge=1, le=16, description="Grid exponent of box families.")
    ifs: Optional[str] = Field(None, description='Maps "a,t;a,t" of an IFS or finite family.')
    p: Optional[str] = Field(None, description='Probabilities "p1,p2,..."; uniform when omitted.')
    measure: Optional[Path] = Field(None, description="Measure JSON file on R.")
    measure2: Optional[Path] = Field(None, description="Second measure JSON file on R.")
    nu: Optional[Path] = Field(None, description="Measure JSON file on G.")
    sampler: Optional[SamplerSpec] = Field(None, description="Sampler description for stationary measures.")
    family: Optional[BoxFamily] = Field(None, description="Box family description.")
    ratios: Optional[str] = Field(None, description='Ratios "r1,r2,..." for the similarity dimension.')
    maps: Optional[str] = Field(None, description='Exact maps "a=...,b=...;...".')
    pool: Optional[str] = Field(None, description="Exact candidate maps for the greedy extension.")
    left: Optional[str] = Field(None, description='Left alternating product, "gamma" marking the unknown.')
    right: Optional[str] = Field(None, description='Right alternating product, "gamma" marking the unknown.')
    L: int = Field(6, ge=1, description="Maximal word length.")
    h: float = Field(0.5, description="Entropy porosity threshold h.")
    delta: float = Field(0.1, gt=0, description="Entropy porosity slack delta.")
    epsilon: float = Field(0.1, gt=0, description="Growth harness epsilon.")
    ratio: float = Field(1.0, gt=0, le=1, description="Constant copy ratio for cantor-copies.")
    ratio_range: Optional[tuple[float, float]] = Field(None, description="Range of the sinusoidal copy-ratio rule.")


class RunManifest(BaseModel):
    command: str
    seed: int
    parameters: dict[str, Any]
    versions: dict[str, str]
    outputs: list[str]
    summary: dict[str, Any] = Field(default_factory=dict)


# ---------------------------------------------------------------------------
# Argument parsing and configuration
# ---------------------------------------------------------------------------


def parse_levels(text: str) -> tuple[int, int]:
    """Parse "a..b" (or a single level) into an inclusive range."""
    low, sep, high = text.partition("..")
    try:
        levels = (int(low), int(high if sep else low))
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must look like 8..18, got {text!r}") from None
    if levels[0] > levels[1]:
        raise argparse.ArgumentTypeError(f"empty level range {text!r}")
    return levels


def parse_range(text: str) -> tuple[float, float]:
    low, _, high = text.partition("..")
    return float(parse_exact(low)), float(parse_exact(high))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, help="Dyadic resolution level.")
    common.add_argument("--m", type=int, help="Refinement depth for component entropies.")
    common.add_argument("--levels", type=parse_levels, help="Level range a..b.")
    common.add_argument("--seed", type=int, help="Master seed.")
    common.add_argument("--samples", type=int, help="Monte-Carlo sample count.")
    common.add_argument("--out", type=Path, help="Output directory.")
    common.add_argument("--workers", type=int, help="Worker threads.")
    common.add_argument("--config", type=Path, help="JSON config file; flags override it.")
    common.add_argument("--log-level", dest="log_level", help="Logging level (DEBUG, INFO, WARNING).")
    common.add_argument("--ifs", help='Maps "a,t;a,t", e.g. "1/3,0;1/3,2/3".')
    common.add_argument("--p", help='Probabilities, e.g. "1/2,1/2".')
    common.add_argument("--measure", type=Path, help="Measure JSON on R.")
    common.add_argument("--measure2", type=Path, help="Second measure JSON on R.")
    common.add_argument("--nu", type=Path, help="Measure JSON on G.")
    common.add_argument("--ratios", help='Ratios, e.g. "1/2,1/4".')
    common.add_argument("--maps", help='Exact maps, e.g. "a=2,b=0;a=2,b=1".')
    common.add_argument("--pool", help="Exact candidate maps for free-extend.")
    common.add_argument("--left", help='Alternating product, e.g. "a=1,b=0;gamma;a=2,b=0".')
    common.add_argument("--right", help="Alternating product on the right-hand side.")
    common.add_argument("--L", type=int, help="Maximal word length.")
    common.add_argument("--h", type=float, help="Entropy porosity threshold.")
    common.add_argument("--delta", type=float, help="Entropy porosity slack.")
    common.add_argument("--epsilon", type=float, help="Growth harness epsilon.")
    common.add_argument("--ratio", type=float, help="Constant copy ratio.")
    common.add_argument("--ratio-range", dest="ratio_range", type=parse_range, help="Sinusoidal ratio rule range lo..hi.")

    parser = argparse.ArgumentParser(
        description="Dyadic entropy, self-similar measure and free semigroup experiments."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        subparsers.add_parser(command, parents=[common])
    return parser


def environment_settings() -> dict[str, Any]:
    settings: dict[str, Any] = {}
    for field_name, key in ENV_KEYS.items():
        value = get_env_int(key)
        if value is not None:
            settings[field_name] = value
    out = get_env_var("FRACTAL_LAB_OUT")
    if out:
        settings["out"] = out
    log_level = get_env_var("FRACTAL_LAB_LOG_LEVEL")
    if log_level:
        settings["log_level"] = log_level
    return settings


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults < environment < config file < flags."""
    settings = environment_settings()
    if args.config is not None:
        settings.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    flags = {key: value for key, value in vars(args).items() if value is not None and key != "config"}
    settings.update(flags)
    return ExperimentConfig.model_validate(settings)


# ---------------------------------------------------------------------------
# Inputs
# ---------------------------------------------------------------------------


def parse_numbers(text: str) -> list[float]:
    return [float(parse_exact(item)) for item in text.split(",") if item.strip()]


def parse_ifs(ifs_text: str, p_text: Optional[str] = None) -> WeightedIFS:
    maps = []
    for chunk in ifs_text.split(";"):
        values = parse_numbers(chunk)
        if len(values) != 2:
            raise ValueError(f"each map needs a ratio and a translation: {chunk!r}")
        maps.append(AffineMap(values[0], values[1]))
    if p_text is None:
        return WeightedIFS.uniform(maps)
    return WeightedIFS(tuple(maps), tuple(parse_numbers(p_text)))


def parse_alternating(text: str) -> list[Optional[ExactAffineMap]]:
    return [None if chunk.strip() == "gamma" else ExactAffineMap.parse(chunk) for chunk in text.split(";")]


def line_measure(config: ExperimentConfig, path: Optional[Path] = None) -> DyadicMeasure1D:
    path = path or config.measure
    if path is not None:
        measure = load_measure(path)
        if not isinstance(measure, DyadicMeasure1D):
            raise ValueError(f"{path} does not hold a measure on R")
        return measure
    if config.ifs is not None:
        return self_similar_measure(parse_ifs(config.ifs, config.p), config.n)
    raise ValueError("no measure given: pass --measure or --ifs")


def group_measure(config: ExperimentConfig) -> DyadicMeasureG:
    if config.nu is not None:
        measure = load_measure(config.nu)
        if not isinstance(measure, DyadicMeasureG):
            raise ValueError(f"{config.nu} does not hold a measure on G")
        return measure
    # empirical measure of random contractions: s uniform in [-1/2, 0), t uniform in [0, 1)
    rng = np.random.default_rng(config.seed)
    count = min(config.samples, GROUP_SAMPLE_POINTS)
    return DyadicMeasureG.from_points(rng.uniform(-0.5, 0.0, count), rng.uniform(0.0, 1.0, count), config.n)


def family_from_config(config: ExperimentConfig) -> FamilySpec:
    if config.family is not None:
        exponent = config.family.grid_exponent or config.grid_exponent
        return FamilySpec.box(config.family.ratio_range, config.family.t_range, exponent)
    if config.ifs is not None:
        return FamilySpec.finite(parse_ifs(config.ifs).maps)
    raise ValueError("no family given: pass --ifs or a config file with a family")


def level_range(config: ExperimentConfig, default: tuple[int, int]) -> range:
    low, high = config.levels or default
    return range(low, high + 1)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


class Outputs:
    """Collects written artifacts in write order."""

    def __init__(self, config: ExperimentConfig):
        self.directory = Path(config.out)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.command = config.command
        self.paths: list[Path] = []

    def csv(self, frame: pd.DataFrame, suffix: str = "") -> Path:
        path = self.directory / f"{self.command}{suffix}.csv"
        frame.to_csv(path, index=False, float_format="%.15g")
        self.paths.append(path)
        print(f"💾 Wrote {path}")
        return path

    def json(self, payload: Any, suffix: str = "") -> Path:
        path = self.directory / f"{self.command}{suffix}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
        self.paths.append(path)
        print(f"💾 Wrote {path}")
        return path

    def measure(self, measure, suffix: str = "_measure") -> Path:
        path = save_measure(measure, self.directory / f"{self.command}{suffix}.json")
        self.paths.append(path)
        print(f"💾 Wrote {path}")
        return path


def run_entropy(config, outputs):
    mu = line_measure(config)
    outputs.csv(sweep_table(mu, level_range(config, (1, mu.level))))
    return {"level": mu.level}


def run_edim(config, outputs):
    mu = line_measure(config)
    estimate = entropy_dim_estimate(mu, min(config.n, mu.level))
    outputs.csv(estimate.to_frame())
    print(f"📐 Entropy dimension estimate: {estimate.slope:.6f}")
    return {"slope": estimate.slope, "lower": estimate.lower, "upper": estimate.upper}


def run_porosity(config, outputs):
    mu = line_measure(config)
    n1, n2 = config.levels or (0, mu.level - config.m)
    verdict = entropy_porosity_test(mu, config.h, config.delta, config.m, n1, n2, workers=config.workers)
    summary = verdict.model_dump(mode="json")
    summary["max_component_entropy"] = max_component_entropy(mu, config.m, n2)
    outputs.json(summary)
    print(f"🧪 Porosity probability {verdict.probability:.4f} ({'passes' if verdict.passes else 'fails'})")
    return summary


def run_convolve(config, outputs):
    mu = line_measure(config)
    nu = line_measure(config, config.measure2) if config.measure2 else mu
    result = convolve_R(nu, mu)
    levels = list(level_range(config, (1, result.level)))
    table = sweep_table(mu, levels).rename(columns={"H_bits": "H_mu_bits", "H_over_n": "H_mu_over_n"})
    convolved = sweep_table(result, levels)
    table["H_conv_bits"] = convolved["H_bits"]
    table["H_conv_over_n"] = convolved["H_over_n"]
    outputs.csv(table)
    outputs.measure(result)
    slope = entropy_dim_estimate(result, result.level).slope
    print(f"📐 Entropy dimension of the convolution: {slope:.6f}")
    return {"convolution_slope": slope}


def run_act(config, outputs):
    mu = line_measure(config)
    nu = group_measure(config)
    result = act_convolve(nu, mu, workers=config.workers)
    outputs.csv(sweep_table(result, level_range(config, (1, result.level))))
    outputs.measure(result)
    return {"cells": len(result)}


def run_growth(config, outputs):
    mu = line_measure(config)
    nu = group_measure(config)
    top = min(mu.level, nu.level)
    experiment = entropy_growth_experiment(
        nu, mu, list(level_range(config, (max(1, top - 6), top))), epsilon=config.epsilon, delta=config.delta,
        m=config.m, workers=config.workers,
    )
    outputs.csv(experiment.table)
    return {"min_tail_gap": experiment.min_tail_gap, "warnings": experiment.warnings}


def run_stationary(config, outputs):
    if config.sampler is not None:
        sampler = config.sampler.build()
    elif config.ifs is not None:
        sampler = FiniteSampler(parse_ifs(config.ifs, config.p))
    else:
        raise ValueError("no sampler given: pass --ifs or a config file with a sampler")
    result = stationary_measure(sampler, config.n, config.samples, seed=config.seed, workers=config.workers)
    outputs.csv(sweep_table(result.measure, level_range(config, (1, config.n))))
    outputs.measure(result.measure)
    slope = entropy_dim_estimate(result.measure, config.n).slope
    print(f"📐 Entropy dimension estimate: {slope:.6f} (max standard error {result.max_standard_error:.2e})")
    return {"slope": slope, "max_standard_error": result.max_standard_error, "mean_tau": result.mean_tau}


def run_selfsim(config, outputs):
    if config.ifs is None:
        raise ValueError("selfsim needs --ifs")
    ifs = parse_ifs(config.ifs, config.p)
    mu = self_similar_measure(ifs, config.n)
    outputs.csv(sweep_table(mu, level_range(config, (1, config.n))))
    outputs.measure(mu)
    residual = stationarity_residual(mu, ifs)
    return {"stationarity_residual": residual, "slope": entropy_dim_estimate(mu, config.n).slope}


def run_attractor(config, outputs):
    cells = attractor_cells(family_from_config(config), config.n)
    path = save_cells(cells, outputs.directory / f"{config.command}_cells.json")
    outputs.paths.append(path)
    print(f"🧩 {len(cells)} cells at level {config.n}")
    return {"cells": len(cells)}


def run_boxdim(config, outputs):
    family = family_from_config(config)
    cellsets = [attractor_cells(family, level) for level in level_range(config, (8, config.n))]
    outputs.csv(dimension_table(cellsets))
    slope = box_dim_estimate(cellsets)
    summary = {"box_dimension": slope}
    if family.grid_exponent is None:
        summary["similarity_dimension"] = similarity_dimension(family.maps)
    print(f"📐 Box dimension estimate: {slope:.6f}")
    return summary


def run_simdim(config, outputs):
    if config.ratios is None:
        raise ValueError("simdim needs --ratios")
    value = similarity_dimension(parse_numbers(config.ratios))
    outputs.json({"similarity_dimension": value})
    print(f"📐 Similarity dimension: {value!r}")
    return {"similarity_dimension": value}


def run_porous_set(config, outputs):
    cells = attractor_cells(family_from_config(config), config.n)
    c = porosity_constant(cells)
    summary: dict[str, Any] = {"porosity_constant": c}
    if c > 0:
        bound = porous_entropy_bound(c)
        summary.update({"m": bound.m, "component_entropy_bound": bound.entropy_bound})
    outputs.json(summary)
    return summary


def run_cantor_copies(config, outputs):
    family = family_from_config(config)
    if config.ratio_range is not None:
        rule = sinusoidal_ratio_rule(*config.ratio_range, seed=config.seed)
    else:
        rule = config.ratio
    cellsets = [cantor_copies_union(attractor_cells(family, level), rule) for level in level_range(config, (10, 18))]
    outputs.csv(dimension_table(cellsets))
    slope = box_dim_estimate(cellsets)
    excess = slope - math.log(2) / math.log(3)
    print(f"📐 Box dimension {slope:.6f}, excess over the Cantor set {excess:+.6f}")
    return {"box_dimension": slope, "excess": excess}


def run_free_check(config, outputs):
    if config.maps is None:
        raise ValueError("free-check needs --maps")
    maps = parse_maps(config.maps)
    verdict = check_free(maps, config.L, config.state_cap)
    if verdict.is_free:
        payload = {"free_up_to": config.L, "maps": [str(m) for m in maps]}
        print(f"✅ Free up to length {config.L}")
    else:
        payload = relation_certificate(verdict, maps).model_dump()
        print(f"🔗 Relation {verdict.w} = {verdict.w_prime}")
    outputs.json(payload)
    return payload


def with_gamma_slots(side: list[Optional[ExactAffineMap]], gamma: ExactAffineMap) -> list[ExactAffineMap]:
    """Fill the gamma slots; a list without slots alternates phi_0, gamma, phi_2, ..."""
    if None not in side:
        side = [slot for phi in side for slot in (phi, None)][:-1]
    return [gamma if phi is None else phi for phi in side]


def relation_holds(left, right, gamma: ExactAffineMap) -> bool:
    left_maps, right_maps = with_gamma_slots(left, gamma), with_gamma_slots(right, gamma)
    return eval_word(range(len(left_maps)), left_maps) == eval_word(range(len(right_maps)), right_maps)


def run_relation_solve(config, outputs):
    if config.left is None or config.right is None:
        raise ValueError("relation-solve needs --left and --right")
    left, right = parse_alternating(config.left), parse_alternating(config.right)
    solutions = relation_solution_set(left, right)
    payload = solutions.describe()
    samples = solutions.sample_points(5, np.random.default_rng(config.seed))
    payload["samples"] = [{"gamma": str(gamma), "holds": relation_holds(left, right, gamma)} for gamma in samples]
    outputs.json(payload)
    print(f"🧮 Solution set: {solutions.kind.value}")
    return {"kind": solutions.kind.value}


def run_free_extend(config, outputs):
    if config.pool is None:
        raise ValueError("free-extend needs --pool")
    start = parse_maps(config.maps) if config.maps else []
    extension = greedy_free_extension(parse_maps(config.pool), start, config.L, config.state_cap)
    payload = {
        "free_set": [str(m) for m in extension.free_set],
        "accepted": [str(m) for m in extension.accepted],
        "rejected": [
            {"map": str(gamma), "w": relation.w.to_json(), "w_prime": relation.w_prime.to_json()}
            for gamma, relation in extension.rejected
        ],
    }
    outputs.json(payload)
    return {"accepted": len(extension.accepted), "rejected": len(extension.rejected)}


RUNNERS = {
    "entropy": run_entropy,
    "edim": run_edim,
    "porosity": run_porosity,
    "convolve": run_convolve,
    "act": run_act,
    "growth": run_growth,
    "stationary": run_stationary,
    "selfsim": run_selfsim,
    "attractor": run_attractor,
    "boxdim": run_boxdim,
    "simdim": run_simdim,
    "porous-set": run_porous_set,
    "cantor-copies": run_cantor_copies,
    "free-check": run_free_check,
    "relation-solve": run_relation_solve,
    "free-extend": run_free_extend,
}


def package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for package in ("numpy", "pandas", "pydantic"):
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "unknown"
    return versions


def run(config: ExperimentConfig) -> RunManifest:
    """Execute one subcommand and write its manifest next to the artifacts."""
    outputs = Outputs(config)
    summary = RUNNERS[config.command](config, outputs)
    manifest = RunManifest(
        command=config.command,
        seed=config.seed,
        parameters=config.model_dump(mode="json"),
        versions=package_versions(),
        outputs=[path.name for path in outputs.paths],
        summary=json.loads(json.dumps(summary, default=str)),
    )
    manifest_path = outputs.directory / f"{config.command}.manifest.json"
    manifest_path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    print(f"📝 Manifest: {manifest_path}")
    return manifest


def main(argv: Optional[list[str]] = None) -> int:
    load_env_from_base()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse has already printed usage or help
        return 0 if exc.code in (0, None) else 1
    try:
        config = load_config(args)
    except (ValidationError, ValueError, FileNotFoundError) as exc:
        print(f"❌ Configuration error: {exc}", file=sys.stderr)
        return 1

    logging.basicConfig(
        level=getattr(logging, config.log_level.upper(), logging.INFO),
        format="%(asctime)s - %(levelname)s - %(message)s",
    )
    try:
        run(config)
    except PreconditionError as exc:
        logger.error(f"Precondition violated: {exc}")
        print(f"❌ Precondition violated: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ValueError, FileNotFoundError) as exc:
        print(f"❌ Configuration error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
