"""Experiment configuration: a line-oriented key-value format with sections.

Grammar (documented in docs/config_format.md): blank lines and lines whose
first non-space character is '#' are ignored; '[name]' opens a section;
'key = value' assigns within the current section. Values are plain tokens,
space-separated lists, or ';'-separated matrix rows. The serializer emits a
canonical form that parses back to an equal config (floats via repr, so the
round trip is a fixed point).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .downstream import BelgicParams, validate_params
from .env import BanditInstance, build_instance, random_instance, REWARD_MODELS
from .upstream import RegretCertificate, ucb_certificate

MODES = ("property", "no-property")
UPSTREAM_POLICIES = ("ucb", "best_response")
DOWNSTREAM_POLICIES = {
    "property": ("belgic", "oracle", "zero"),
    "no-property": ("naive", "best_response"),
}
TRAJECTORY_MODES = ("none", "full")

_SECTIONS = {
    "game": ("mode", "arms", "horizon", "seeds"),
    "instance": ("v_up", "v_down", "reward_model", "generate_seed", "require_misaligned"),
    "params": ("alpha", "beta"),
    "upstream": ("policy", "c_mode"),
    "downstream": ("policy",),
    "output": ("dir", "trajectory"),
}


class ConfigError(ValueError):
    """Config problem; carries the 1-based line number when one applies."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class GameConfig:
    mode: str
    n_arms: int
    horizon: int
    seeds: tuple[int, ...]
    v_up: tuple[float, ...] | None = None
    v_down: tuple[tuple[float, ...], ...] | None = None
    reward_model: str = "gaussian"
    generate_seed: int | None = None
    require_misaligned: bool = False
    alpha: float = 0.75
    beta: float = 0.25
    upstream_policy: str = "ucb"
    c_mode: str = "theoretical"
    downstream_policy: str = ""  # filled with the mode default when blank
    output_dir: str = "runs"
    trajectory: str = "none"


def _parse_int(raw: str, line: int, label: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{label} must be an integer, got {raw!r}", line) from None


def _parse_float(raw: str, line: int, label: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{label} must be a number, got {raw!r}", line) from None


def _parse_bool(raw: str, line: int, label: str) -> bool:
    lowered = raw.lower()
    if lowered in ("yes", "true", "1"):
        return True
    if lowered in ("no", "false", "0"):
        return False
    raise ConfigError(f"{label} must be yes/no, got {raw!r}", line)


def parse_config(text: str) -> GameConfig:
    """Parse and semantically validate a config document."""
    values: dict[tuple[str, str], tuple[str, int]] = {}
    section: str | None = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(
                    f"unknown section [{section}]; expected one of "
                    + ", ".join(f"[{s}]" for s in _SECTIONS),
                    line_no,
                )
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value' or a [section] header, got {raw_line!r}", line_no)
        if section is None:
            raise ConfigError("assignment before any [section] header", line_no)
        key, _, raw_value = line.partition("=")
        key = key.strip()
        value = raw_value.strip()
        if key not in _SECTIONS[section]:
            raise ConfigError(
                f"unknown key {key!r} in [{section}]; expected one of {', '.join(_SECTIONS[section])}",
                line_no,
            )
        if (section, key) in values:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", line_no)
        values[(section, key)] = (value, line_no)

    def take(section: str, key: str) -> tuple[str, int] | None:
        return values.pop((section, key), None)

    def require(section: str, key: str) -> tuple[str, int]:
        got = take(section, key)
        if got is None:
            raise ConfigError(f"missing required key {key!r} in [{section}]")
        return got

    mode_raw, mode_line = require("game", "mode")
    if mode_raw not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode_raw!r}", mode_line)
    arms_raw, arms_line = require("game", "arms")
    n_arms = _parse_int(arms_raw, arms_line, "arms")
    horizon_raw, horizon_line = require("game", "horizon")
    horizon = _parse_int(horizon_raw, horizon_line, "horizon")
    seeds_raw, seeds_line = require("game", "seeds")
    seeds = tuple(_parse_int(tok, seeds_line, "seed") for tok in seeds_raw.split())

    v_up = v_down = None
    generate_seed = None
    require_misaligned = False
    reward_model = "gaussian"
    got = take("instance", "reward_model")
    if got is not None:
        reward_model, line = got
        if reward_model not in REWARD_MODELS:
            raise ConfigError(f"reward_model must be one of {REWARD_MODELS}", line)
    got = take("instance", "v_up")
    if got is not None:
        raw, line = got
        v_up = tuple(_parse_float(tok, line, "v_up entry") for tok in raw.split())
    got = take("instance", "v_down")
    if got is not None:
        raw, line = got
        v_down = tuple(
            tuple(_parse_float(tok, line, "v_down entry") for tok in row.split())
            for row in raw.split(";")
        )
    got = take("instance", "generate_seed")
    if got is not None:
        generate_seed = _parse_int(*got, "generate_seed")
    got = take("instance", "require_misaligned")
    if got is not None:
        require_misaligned = _parse_bool(*got, "require_misaligned")

    cfg = GameConfig(
        mode=mode_raw,
        n_arms=n_arms,
        horizon=horizon,
        seeds=seeds,
        v_up=v_up,
        v_down=v_down,
        reward_model=reward_model,
        generate_seed=generate_seed,
        require_misaligned=require_misaligned,
    )
    got = take("params", "alpha")
    if got is not None:
        cfg = replace(cfg, alpha=_parse_float(*got, "alpha"))
    got = take("params", "beta")
    if got is not None:
        cfg = replace(cfg, beta=_parse_float(*got, "beta"))
    got = take("upstream", "policy")
    if got is not None:
        raw, line = got
        if raw not in UPSTREAM_POLICIES:
            raise ConfigError(f"upstream policy must be one of {UPSTREAM_POLICIES}", line)
        cfg = replace(cfg, upstream_policy=raw)
    got = take("upstream", "c_mode")
    if got is not None:
        raw, line = got
        _parse_c_mode(raw, line)
        cfg = replace(cfg, c_mode=raw)
    got = take("downstream", "policy")
    if got is not None:
        cfg = replace(cfg, downstream_policy=got[0])
    got = take("output", "dir")
    if got is not None:
        cfg = replace(cfg, output_dir=got[0])
    got = take("output", "trajectory")
    if got is not None:
        raw, line = got
        if raw not in TRAJECTORY_MODES:
            raise ConfigError(f"trajectory must be one of {TRAJECTORY_MODES}", line)
        cfg = replace(cfg, trajectory=raw)

    if not cfg.downstream_policy:
        cfg = replace(
            cfg, downstream_policy="belgic" if cfg.mode == "property" else "naive"
        )
    validate_config(cfg)
    return cfg


def _parse_c_mode(raw: str, line: int | None) -> float | None:
    """Returns the fixed scale, or None for the theoretical mode."""
    if raw == "theoretical":
        return None
    if raw.startswith("fixed:"):
        try:
            scale = float(raw[len("fixed:") :])
        except ValueError:
            raise ConfigError(f"bad fixed scale in c_mode {raw!r}", line) from None
        if scale < 0.0:
            raise ConfigError(f"c_mode fixed scale must be >= 0, got {scale}", line)
        return scale
    raise ConfigError(f"c_mode must be 'theoretical' or 'fixed:<scale>', got {raw!r}", line)


def validate_config(cfg: GameConfig) -> None:
    """Semantic checks that need the whole config (no line numbers)."""
    if cfg.n_arms < 1:
        raise ConfigError(f"arms must be >= 1, got {cfg.n_arms}")
    if cfg.horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {cfg.horizon}")
    if not cfg.seeds:
        raise ConfigError("need at least one seed")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        raise ConfigError(f"seeds must be pairwise distinct, got {cfg.seeds}")
    if any(s < 0 for s in cfg.seeds):
        raise ConfigError("seeds must be >= 0")
    explicit = cfg.v_up is not None or cfg.v_down is not None
    generated = cfg.generate_seed is not None
    if explicit and generated:
        raise ConfigError("give either explicit means or generate_seed, not both")
    if not explicit and not generated:
        raise ConfigError("instance needs v_up/v_down or generate_seed")
    if explicit:
        if cfg.v_up is None or cfg.v_down is None:
            raise ConfigError("explicit instances need both v_up and v_down")
        if len(cfg.v_up) != cfg.n_arms:
            raise ConfigError(f"v_up has {len(cfg.v_up)} entries but arms = {cfg.n_arms}")
        build_instance(cfg.v_up, cfg.v_down, cfg.reward_model)  # full mean/shape checks
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.upstream_policy not in UPSTREAM_POLICIES:
        raise ConfigError(f"unknown upstream policy {cfg.upstream_policy!r}")
    allowed = DOWNSTREAM_POLICIES[cfg.mode]
    if cfg.downstream_policy not in allowed:
        raise ConfigError(
            f"downstream policy {cfg.downstream_policy!r} not valid in {cfg.mode} mode; "
            f"expected one of {allowed}"
        )
    if cfg.upstream_policy == "ucb" and cfg.horizon < cfg.n_arms:
        raise ConfigError(
            f"horizon {cfg.horizon} cannot fit the forced exploration of {cfg.n_arms} arms"
        )
    _parse_c_mode(cfg.c_mode, None)
    if cfg.mode == "property" and cfg.downstream_policy == "belgic":
        try:
            validate_params(belgic_params(cfg, cfg.horizon))
        except ValueError as exc:
            raise ConfigError(f"invalid search parameters: {exc}") from None


def resolve_certificate(cfg: GameConfig, horizon: int) -> RegretCertificate:
    fixed = _parse_c_mode(cfg.c_mode, None)
    if fixed is None:
        return ucb_certificate(cfg.n_arms, horizon)
    return RegretCertificate(scale=fixed)


def belgic_params(cfg: GameConfig, horizon: int) -> BelgicParams:
    return BelgicParams(
        n_arms=cfg.n_arms,
        horizon=horizon,
        alpha=cfg.alpha,
        beta=cfg.beta,
        certificate=resolve_certificate(cfg, horizon),
    )


def config_instance(cfg: GameConfig) -> BanditInstance:
    """Materialize the instance: explicit means, or a seeded uniform draw."""
    if cfg.v_up is not None:
        return build_instance(cfg.v_up, cfg.v_down, cfg.reward_model)
    rng = np.random.default_rng(cfg.generate_seed)
    return random_instance(
        rng, cfg.n_arms, cfg.reward_model, require_misaligned=cfg.require_misaligned
    )


def serialize_config(cfg: GameConfig) -> str:
    """Canonical form; parse(serialize(cfg)) == cfg."""
    lines = [
        "[game]",
        f"mode = {cfg.mode}",
        f"arms = {cfg.n_arms}",
        f"horizon = {cfg.horizon}",
        "seeds = " + " ".join(str(s) for s in cfg.seeds),
        "",
        "[instance]",
    ]
    if cfg.v_up is not None:
        lines.append("v_up = " + " ".join(repr(x) for x in cfg.v_up))
        lines.append(
            "v_down = " + " ; ".join(" ".join(repr(x) for x in row) for row in cfg.v_down)
        )
    else:
        lines.append(f"generate_seed = {cfg.generate_seed}")
        lines.append(f"require_misaligned = {'yes' if cfg.require_misaligned else 'no'}")
    lines += [
        f"reward_model = {cfg.reward_model}",
        "",
        "[params]",
        f"alpha = {cfg.alpha!r}",
        f"beta = {cfg.beta!r}",
        "",
        "[upstream]",
        f"policy = {cfg.upstream_policy}",
        f"c_mode = {cfg.c_mode}",
        "",
        "[downstream]",
        f"policy = {cfg.downstream_policy}",
        "",
        "[output]",
        f"dir = {cfg.output_dir}",
        f"trajectory = {cfg.trajectory}",
        "",
    ]
    return "\n".join(lines)


def parse_config_file(path: str) -> GameConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
