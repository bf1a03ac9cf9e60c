"""TOML run configuration with strict key checking."""

import sys
from pathlib import Path

from .errors import ConfigError, InvalidParameter, MissingInput
from .experiments import ExperimentConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

GRAPH_KEYS = {"family", "N", "n", "dim", "k"}
TABLE_KEYS = {
    "experiment": {"name", "replicates", "y0", "a_N", "T", "sizes", "heights", "C", "nu", "level",
                   "walks", "zeta", "starts", "window", "T_values", "stop_heights", "permutations",
                   "biased", "engine"},
    "rng": {"master_seed", "fastforward_eps", "exact_excursions"},
    "tolerances": {"variance_rel", "p_value", "solve", "ks"},
    "output": {"dir"},
    "simulate": {"T", "mode", "stop_height"},
    "spectrum": {"K", "method", "a_N"},
}
TOP_KEYS = set(TABLE_KEYS) | {"graph", "graphs", "modes"}
MODE_KEYS = {"k", "family", "params"}


def _check_keys(where, got, allowed):
    unknown = sorted(set(got) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def validate_mapping(doc):
    _check_keys("top level", doc, TOP_KEYS)
    for name, allowed in TABLE_KEYS.items():
        if name in doc:
            if not isinstance(doc[name], dict):
                raise ConfigError(f"[{name}] must be a table")
            _check_keys(f"[{name}]", doc[name], allowed)
    if "graph" in doc:
        _check_keys("[graph]", doc["graph"], GRAPH_KEYS)
    for i, gtab in enumerate(doc.get("graphs", [])):
        _check_keys(f"[[graphs]] #{i + 1}", gtab, GRAPH_KEYS)
    for i, m in enumerate(doc.get("modes", [])):
        _check_keys(f"[[modes]] #{i + 1}", m, MODE_KEYS)
        if "k" not in m:
            raise ConfigError(f"[[modes]] #{i + 1} needs k")
    return doc


def parse_config_text(text):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config does not parse: {e}") from e
    return validate_mapping(doc)


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"no such config file: {path}")
    return parse_config_text(path.read_text())


def experiment_config(doc, name=None, seed=None):
    """Assemble an ExperimentConfig from a parsed document."""
    exp = dict(doc.get("experiment", {}))
    rng = doc.get("rng", {})
    kw = {}
    if name is not None:
        exp["name"] = name
    kw.update(exp)
    if "graph" in doc:
        kw["graph"] = dict(doc["graph"])
    if "graphs" in doc:
        kw["graphs"] = [dict(g) for g in doc["graphs"]]
    if "modes" in doc:
        kw["modes"] = [dict(m) for m in doc["modes"]]
    for key in ("master_seed", "fastforward_eps", "exact_excursions"):
        if key in rng:
            kw[key] = rng[key]
    if seed is not None:
        kw["master_seed"] = int(seed)
    if "tolerances" in doc:
        kw["tolerances"] = dict(doc["tolerances"])
    if "output" in doc and "dir" in doc["output"]:
        kw["out_dir"] = doc["output"]["dir"]
    try:
        return ExperimentConfig(**kw)
    except TypeError as e:
        raise InvalidParameter(str(e)) from e
