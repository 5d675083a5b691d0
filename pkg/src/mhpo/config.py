"""Run configuration files: parse, fill defaults, validate and echo.

A run file is TOML with four sections. ``[method]`` names the surrogate and
its parameters, ``[env]`` the task and policy size, ``[train]`` the loop and
optimizer settings, and ``[report]`` the labelling used by ``report``. Unknown
keys are rejected. Dotted command-line overrides (``--method.c 2.0``) are
applied before validation, and the resolved document round-trips exactly.
"""

from __future__ import annotations

import copy
from pathlib import Path

import tomli
import tomli_w

from . import transforms as tf
from .advantage import DEGENERACY_TOL
from .envs import EnvKind, EnvSpec, _DEFAULT_VOCAB
from .errors import ConfigError, DomainError
from .objectives import Method, MethodConfig
from .trainer import DEFAULT_LR, Optimizer, TrainConfig

SECTIONS = ("method", "env", "train", "report")

_DHP_DEFAULTS = {"k_pos": 1.5, "lambda_pos": 1.0, "k_neg": 2.0, "lambda_neg": 0.8}
_METHOD_KEYS = {
    Method.MHPO: {"c": 1.5, **_DHP_DEFAULTS},
    Method.GRPO_CLIP: {"eps": None},
    Method.DAPO_CLIP: {"eps_low": None, "eps_high": None},
    Method.NAIVE_PG: {},
}
_ENV_DEFAULTS = {"kind": "parity", "n_prompts": 8, "vocab_size": None, "order": 2, "max_len": 16}
_TRAIN_DEFAULTS = {
    "group_size": 8,
    "prompts_per_batch": 16,
    "updates_per_rollout": 4,
    "optimizer": "sgd",
    "learning_rate": None,
    "moment_decays": [0.9, 0.999],
    "epsilon_hat": 1e-8,
    "total_steps": 500,
    "eval_every": 10,
    "seed": 0,
    "degeneracy_tol": DEGENERACY_TOL,
}
_REPORT_DEFAULTS = {"label": None, "charts": True}

# keys whose values must be real numbers even when written as integers
_REAL_KEYS = {"c", "k_pos", "lambda_pos", "k_neg", "lambda_neg", "eps", "eps_low", "eps_high",
              "learning_rate", "epsilon_hat", "degeneracy_tol"}


def _typed(section: str, key: str, value, default):
    where = f"{section}.{key}"
    if key in _REAL_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if key == "moment_decays":
        if not (isinstance(value, list) and len(value) == 2):
            raise ConfigError(f"{where}: expected a pair of numbers")
        return [_typed(section, "learning_rate", v, None) for v in value]
    want = type(default) if default is not None else None
    if key == "vocab_size":
        want = int
    if key == "label":
        want = str
    if want is bool and not isinstance(value, bool):
        raise ConfigError(f"{where}: expected true/false, got {value!r}")
    if want is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if want is str and not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string, got {value!r}")
    return value


def _fill(section: str, given: dict, defaults: dict) -> dict:
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"{section}.{unknown[0]}: unknown key")
    out = {}
    for key, default in defaults.items():
        if key in given:
            out[key] = _typed(section, key, given[key], default)
        elif default is not None:
            out[key] = copy.deepcopy(default)
    return out


def resolve(doc: dict) -> dict:
    """Validate a raw document and return it with every default filled in.

    Keys whose default depends on other keys (vocabulary size, learning rate,
    report label) are resolved to concrete values, so the result fully
    determines a run.
    """
    unknown = sorted(set(doc) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown section")
    for name in SECTIONS:
        if not isinstance(doc.get(name, {}), dict):
            raise ConfigError(f"{name}: expected a table")

    raw_method = dict(doc.get("method", {}))
    name = raw_method.pop("name", "mhpo")
    try:
        method = Method(name)
    except ValueError:
        raise ConfigError(f"method.name: unknown method {name!r}") from None
    method_sec = {"name": method.value}
    for key in raw_method:
        if key not in _METHOD_KEYS[method] and any(key in k for k in _METHOD_KEYS.values()):
            raise ConfigError(f"method.{key}: not used by method {method.value}")
    method_sec.update(_fill("method", raw_method, _METHOD_KEYS[method]))
    for key, default in _METHOD_KEYS[method].items():
        if default is None and key not in method_sec:
            raise ConfigError(f"method.{key}: required for method {method.value}")

    env = _fill("env", doc.get("env", {}), _ENV_DEFAULTS)
    try:
        kind = EnvKind(env["kind"])
    except ValueError:
        raise ConfigError(f"env.kind: unknown environment {env['kind']!r}") from None
    env.setdefault("vocab_size", _DEFAULT_VOCAB[kind])

    train = _fill("train", doc.get("train", {}), _TRAIN_DEFAULTS)
    try:
        opt = Optimizer(train["optimizer"])
    except ValueError:
        raise ConfigError(f"train.optimizer: unknown optimizer {train['optimizer']!r}") from None
    train.setdefault("learning_rate", DEFAULT_LR[opt])

    report = _fill("report", doc.get("report", {}), _REPORT_DEFAULTS)
    report.setdefault("label", method.value)

    env = {k: env[k] for k in _ENV_DEFAULTS}
    train = {k: train[k] for k in _TRAIN_DEFAULTS}
    report = {k: report[k] for k in _REPORT_DEFAULTS}
    resolved = {"method": method_sec, "env": env, "train": train, "report": report}
    build(resolved)
    return resolved


def method_config(method_sec: dict) -> MethodConfig:
    method = Method(method_sec["name"])
    try:
        if method is Method.MHPO:
            dhp = tf.DhpParams(**{k: method_sec[k] for k in _DHP_DEFAULTS})
            return MethodConfig(method, lfm=tf.LfmParams(method_sec["c"]), dhp=dhp)
        kwargs = {k: method_sec[k] for k in _METHOD_KEYS[method]}
        return MethodConfig(method, **kwargs)
    except DomainError as exc:
        raise ConfigError(f"method: {exc}") from None


def build(resolved: dict) -> TrainConfig:
    """TrainConfig for a resolved document."""
    env_sec, train = resolved["env"], resolved["train"]
    env = EnvSpec(env_sec["kind"], env_sec["n_prompts"], env_sec["vocab_size"])
    return TrainConfig(
        method_cfg=method_config(resolved["method"]),
        env=env,
        order=env_sec["order"],
        max_len=env_sec["max_len"],
        moment_decays=tuple(train["moment_decays"]),
        **{k: v for k, v in train.items() if k != "moment_decays"},
    )


def parse_value(text: str):
    """Interpret an override value as a TOML scalar, falling back to a bare string."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_overrides(doc: dict, overrides: dict[str, str]) -> dict:
    out = copy.deepcopy(doc)
    for dotted, text in overrides.items():
        section, _, key = dotted.partition(".")
        if section not in SECTIONS or not key:
            raise ConfigError(f"{dotted}: overrides take the form section.key")
        out.setdefault(section, {})[key] = parse_value(text)
    return out


def load(path: str | Path | None, overrides: dict[str, str] | None = None) -> dict:
    """Read, override and resolve a run file; ``None`` starts from defaults."""
    doc = {}
    if path is not None:
        with open(path, "rb") as fh:
            try:
                doc = tomli.load(fh)
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
    return resolve(apply_overrides(doc, overrides or {}))


def dumps(resolved: dict) -> str:
    return tomli_w.dumps(resolved)


def loads(text: str) -> dict:
    return resolve(tomli.loads(text))
