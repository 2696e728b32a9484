"""Scenario files: one investor's latency paths and strategy as JSON, checked
against ``data/scenario.schema.json``."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import jsonschema

from .analytics import CostProfile, choose_execution_time, optimal_delay_closed_form, \
    optimal_delay_numeric
from .engine import Delayed, Immediate, OrderKind, SimConfig, TimedExecution
from .errors import ConfigError, ParseError
from .latency import LatencyPair, load_latency_csv
from .market import (ExpenditureTriple, LinearMarketPair, expenditures, solve_equilibrium,
                     split_order)

BUNDLED = ("albany", "kampala", "knoxville", "london", "frankfurt")


def data_path(name: str) -> Path:
    return Path(str(resources.files("latarb") / "data" / name))


def load_schema(name: str) -> dict:
    return json.loads(data_path(name).read_text())


@dataclass(frozen=True)
class StrategySpec:
    kind: str  # immediate | delayed | timed
    delta: float | str | None = None  # number or "optimal"
    t_exec: float | None = None
    target: float | None = None

    def as_dict(self) -> dict:
        out = {"kind": self.kind}
        for key in ("delta", "t_exec", "target"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


@dataclass(frozen=True)
class Scenario:
    name: str
    path: Path
    pair: LatencyPair
    leg_names: tuple[str, str]
    market: ExpenditureTriple
    strategy: StrategySpec
    sim: dict
    provenance: str = ""

    @property
    def costs(self) -> CostProfile:
        return CostProfile.from_triple(self.market)

    def with_strategy(self, strategy: StrategySpec) -> "Scenario":
        return replace(self, strategy=strategy)

    def resolve_strategy(self) -> tuple[OrderKind, dict]:
        """Concrete order kind plus the resolved strategy parameters."""
        st = self.strategy
        if st.kind == "immediate":
            return Immediate(), {"kind": "immediate"}
        if st.kind == "delayed":
            if st.delta == "optimal":
                if self.pair.gaussian:
                    delta = optimal_delay_closed_form(self.pair, self.costs)
                    method = "closed_form"
                else:
                    delta = float(optimal_delay_numeric(self.pair, self.costs).delta)
                    method = "numeric"
                return Delayed(delta), {"kind": "delayed", "delta": delta, "delta_method": method}
            return Delayed(float(st.delta)), {"kind": "delayed", "delta": float(st.delta)}
        if st.target is not None:
            t_exec = choose_execution_time(self.pair, st.target)
            return TimedExecution(t_exec), {"kind": "timed", "t_exec": t_exec, "target": st.target}
        return TimedExecution(float(st.t_exec)), {"kind": "timed", "t_exec": float(st.t_exec)}

    def sim_config(self, **overrides) -> SimConfig:
        sim = dict(self.sim)
        sim.update({k: v for k, v in overrides.items() if v is not None})
        return SimConfig(
            replications=sim.get("replications", 100_000),
            master_seed=sim.get("seed", 0),
            sampling_mode=sim.get("sampling", "physical"),
            clock_jitter=float(sim.get("jitter", 0.0)),
            hft_enabled=sim.get("hft_enabled", True),
            threads=sim.get("threads", 1),
        )


def resolve_path(ref: str | Path) -> Path:
    """A scenario path, or the name of a bundled scenario (``albany``, ``albany.json``)."""
    path = Path(ref)
    if path.exists():
        return path
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    if stem in BUNDLED and path.parent == Path("."):
        return data_path(f"{stem}.json")
    raise ConfigError(f"scenario not found: {ref}")


def build_market(spec: dict) -> ExpenditureTriple:
    if "costs" in spec:
        c = spec["costs"]
        return ExpenditureTriple(float(c["e_sim"]), float(c["e_l"]), float(c["e_s"]))
    if "linear" in spec:
        lin = spec["linear"]
        pair = LinearMarketPair(lin["a"], lin["b"], lin["c"], lin["d"], lin["x_bar"])
        x_tilde = lin["x_tilde"]
    else:
        imp = spec["impact_bp"]
        pair = LinearMarketPair.from_impacts(imp["small"], imp["large"],
                                             price=imp.get("price", 100.0),
                                             x_bar=imp.get("x_bar", 100.0))
        x_tilde = imp.get("x_tilde", 1.0)
    eq = solve_equilibrium(pair)
    order = split_order(pair, eq, x_tilde)
    return expenditures(pair, eq, order.p_star)


def load_scenario(ref) -> Scenario:
    path = resolve_path(ref)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from None
    try:
        jsonschema.validate(raw, load_schema("scenario.schema.json"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {where}: {exc.message}") from None

    catalog_path = Path(raw["catalog"])
    if not catalog_path.is_absolute():
        catalog_path = path.parent / catalog_path
    catalog = load_latency_csv(catalog_path)
    lat = raw["latency"]
    missing = [n for n in (lat["small"], lat["large"]) if n not in catalog]
    if missing:
        raise ConfigError(f"{path}: latency names not in catalog: {', '.join(missing)}")
    pair = LatencyPair(catalog[lat["small"]], catalog[lat["large"]], float(lat["hft_ms"]))

    st = raw["strategy"]
    strategy = StrategySpec(kind=st["kind"], delta=st.get("delta"), t_exec=st.get("t_exec"),
                            target=st.get("target"))
    return Scenario(name=raw["name"], path=path, pair=pair,
                    leg_names=(lat["small"], lat["large"]), market=build_market(raw["market"]),
                    strategy=strategy, sim=raw.get("simulation", {}),
                    provenance=raw.get("provenance", ""))
