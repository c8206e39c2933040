"""Command-line pipeline: documents -> counts -> indices -> panel -> VAR.

Subcommands: ``count``, ``index``, ``panel``, ``estimate``, ``simulate``,
and ``report`` (all stages end to end). A single JSON config file drives a
run; TOML works on Python 3.11+. Command-line flags override config values.

Every CSV output starts with ``#`` metadata lines (tool version, config
hash, window); JSON outputs carry the same data under a ``_metadata`` key.
Re-running a command on identical inputs produces byte-identical files.

Exit codes: 2 malformed input, 3 date-sanity violation, 4 index errors,
5 estimation errors, 6 invalid game.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, corpus, index, normgame, periods, var
from .corpus import DateSanityError, DocumentsCsvError
from .index import IndexSeries, SeriesError, ShareSeries
from .normgame import GameError, InvalidGameError
from .periods import Period
from .var import VarError

EXIT_BAD_INPUT = 2
EXIT_DATE_SANITY = 3
EXIT_INDEX = 4
EXIT_ESTIMATION = 5
EXIT_GAME = 6


class ConfigError(Exception):
    pass


class UnbalancedPanelError(VarError):
    pass


@dataclass
class ExternalSeries:
    path: Path
    normalize_mean100: bool = False


@dataclass
class RunConfig:
    documents: Path | None = None
    phrase_sets: Path | None = None
    primary_phrase_set: str | None = None
    external_series: dict[str, ExternalSeries] = field(default_factory=dict)
    window_start: str | None = None
    window_end: str | None = None
    granularity: str = periods.MONTHLY
    lags: int = 4
    variables: list[str] | None = None
    sd100_groups: list[str] = field(default_factory=list)
    game: Path | None = None
    sim_steps: int = 40
    sim_start: list[float] | None = None
    out: Path = Path("out")

    def config_hash(self) -> str:
        """Hash of the run's semantic settings; file paths excluded so the
        same analysis hashes identically from any checkout location."""
        payload: dict = {
            "primary_phrase_set": self.primary_phrase_set,
            "window_start": self.window_start,
            "window_end": self.window_end,
            "granularity": self.granularity,
            "lags": self.lags,
            "variables": self.variables,
            "sd100_groups": sorted(self.sd100_groups),
            "sim_steps": self.sim_steps,
            "sim_start": self.sim_start,
            "externals": {
                name: ext.normalize_mean100
                for name, ext in sorted(self.external_series.items())
            },
        }
        if self.phrase_sets is not None and self.phrase_sets.exists():
            payload["phrase_sets"] = [
                {
                    "name": ps.name,
                    "phrases": list(ps.phrases),
                    "match_mode": ps.match_mode,
                }
                for ps in corpus.load_phrase_sets(self.phrase_sets)
            ]
        blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]

    def metadata(self) -> list[str]:
        if self.window_start or self.window_end:
            window = f"{self.window_start or 'open'}..{self.window_end or 'open'}"
        else:
            window = "full"
        return [
            f"tool: attnflow {__version__}",
            f"config: {self.config_hash()}",
            f"window: {window}",
        ]

    def window(self, granularity: str) -> index.Window:
        """Config window converted to the given granularity, or None."""
        if self.window_start is None or self.window_end is None:
            return None
        lo = periods.parse(self.window_start)
        hi = periods.parse(self.window_end)
        lo, hi = (_convert_period(lo, granularity), _convert_period(hi, granularity))
        if lo > hi:
            raise ConfigError(f"window start {lo} after end {hi}")
        return (lo, hi)


def _convert_period(p: Period, granularity: str) -> Period:
    if p.granularity == granularity:
        return p
    if p.granularity == periods.MONTHLY and granularity == periods.QUARTERLY:
        return periods.quarter_of(p)
    if p.granularity == periods.MONTHLY and granularity == periods.YEARLY:
        return periods.year_of(p)
    if p.granularity == periods.QUARTERLY and granularity == periods.YEARLY:
        return periods.year_of(p)
    raise ConfigError(
        f"cannot interpret {p.granularity} period {p} at {granularity} granularity"
    )


def load_config_file(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".toml":
        try:
            import tomllib
        except ImportError:
            raise ConfigError(
                "TOML configs need Python 3.11+; use a JSON config instead"
            ) from None
        return tomllib.loads(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def build_config(args: argparse.Namespace) -> RunConfig:
    raw: dict = {}
    base = Path(".")
    if args.config:
        cfg_path = Path(args.config)
        raw = load_config_file(cfg_path)
        base = cfg_path.parent

    def as_path(key):
        return (base / raw[key]) if key in raw and raw[key] else None

    cfg = RunConfig(
        documents=as_path("documents"),
        phrase_sets=as_path("phrase_sets"),
        primary_phrase_set=raw.get("primary_phrase_set"),
        window_start=raw.get("window_start"),
        window_end=raw.get("window_end"),
        granularity=raw.get("granularity", periods.MONTHLY),
        lags=int(raw.get("lags", 4)),
        variables=raw.get("variables"),
        sd100_groups=list(raw.get("sd100_groups", [])),
        game=as_path("game"),
        sim_steps=int(raw.get("sim_steps", 40)),
        sim_start=raw.get("sim_start"),
        out=base / raw.get("out", "out"),
    )
    for name, ext in raw.get("external_series", {}).items():
        if isinstance(ext, str):
            cfg.external_series[name] = ExternalSeries(path=base / ext)
        else:
            cfg.external_series[name] = ExternalSeries(
                path=base / ext["path"],
                normalize_mean100=bool(ext.get("normalize_mean100", False)),
            )
    # flags win over config values
    if args.out:
        cfg.out = Path(args.out)
    if args.window_start:
        cfg.window_start = args.window_start
    if args.window_end:
        cfg.window_end = args.window_end
    if args.granularity:
        cfg.granularity = args.granularity
    if args.lags is not None:
        cfg.lags = args.lags
    if cfg.granularity not in periods.GRANULARITIES:
        raise ConfigError(f"unknown granularity {cfg.granularity!r}")
    if not 1 <= cfg.lags <= 8:
        raise ConfigError(f"lags must be in 1..8, got {cfg.lags}")
    return cfg


def _write_text(path: Path, write_fn) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_fn(f)


# ---------------------------------------------------------------------------
# Pipeline stages
# ---------------------------------------------------------------------------


def _load_corpus(cfg: RunConfig) -> tuple[list[corpus.Document], list[corpus.PhraseSet], corpus.PhraseSet]:
    if cfg.documents is None:
        raise ConfigError("no documents CSV configured")
    if cfg.phrase_sets is None:
        raise ConfigError("no phrase-set config configured")
    docs = corpus.read_documents_csv(cfg.documents)
    sets = corpus.load_phrase_sets(cfg.phrase_sets)
    if not sets:
        raise ConfigError(f"{cfg.phrase_sets}: no phrase sets defined")
    if cfg.primary_phrase_set is None:
        primary = sets[0]
    else:
        by_name = {ps.name: ps for ps in sets}
        if cfg.primary_phrase_set not in by_name:
            raise ConfigError(
                f"primary phrase set {cfg.primary_phrase_set!r} not defined"
            )
        primary = by_name[cfg.primary_phrase_set]
    corpus.validate_dates(docs)
    return docs, sets, primary


def cmd_count(cfg: RunConfig) -> int:
    docs, sets, primary = _load_corpus(cfg)
    meta = cfg.metadata()
    agg = corpus.aggregate(docs, primary, cfg.granularity)
    for outlet, series in agg.items():
        _write_text(
            cfg.out / "counts" / f"{outlet}.csv",
            lambda f, s=series: corpus.write_counts_csv(s, f, meta),
        )

    yearly = corpus.count_table(docs, sets, periods.YEARLY)
    _write_text(
        cfg.out / "count_table.csv",
        lambda f: _write_count_table(yearly, f, meta),
    )
    quarterly = corpus.count_table(docs, sets, periods.QUARTERLY)
    _write_text(
        cfg.out / "quarterly_table.csv",
        lambda f: _write_period_table(quarterly, f, meta),
    )
    print(
        f"count: {len(docs)} documents, {len(agg)} outlet(s), "
        f"{len(sets)} phrase set(s) -> {cfg.out}"
    )
    return 0


def _write_count_table(table: corpus.CountTable, f, meta) -> None:
    """Yearly layout: one row per phrase set, one column per period."""
    import csv as _csv

    for line in meta:
        f.write(f"# {line}\n")
    writer = _csv.writer(f, lineterminator="\n")
    writer.writerow(["phrase_set"] + [str(p) for p in table.periods])
    for name, row in zip(table.phrase_sets, table.counts):
        writer.writerow([name] + list(row))


def _write_period_table(table: corpus.CountTable, f, meta) -> None:
    """Period-rows layout: period, document total, one column per phrase set."""
    import csv as _csv

    for line in meta:
        f.write(f"# {line}\n")
    writer = _csv.writer(f, lineterminator="\n")
    writer.writerow(["period", "n"] + list(table.phrase_sets))
    for t, p in enumerate(table.periods):
        writer.writerow([str(p), table.n_docs[t]] + [c[t] for c in table.counts])


def _outlet_groups(docs: list[corpus.Document]) -> dict[str, str]:
    groups: dict[str, str] = {}
    for d in docs:
        g = d.group or d.outlet
        if groups.setdefault(d.outlet, g) != g:
            raise ConfigError(
                f"outlet {d.outlet!r} appears under two groups "
                f"({groups[d.outlet]!r} and {g!r})"
            )
    return groups


def _build_indices(cfg: RunConfig) -> dict[str, IndexSeries]:
    """Per-group indices plus the pooled all-outlet index."""
    docs, _, primary = _load_corpus(cfg)
    agg = corpus.aggregate(docs, primary, cfg.granularity)
    groups = _outlet_groups(docs)
    win = cfg.window(cfg.granularity)

    shares = {
        outlet: index.mention_share_series(series, primary.match_mode)
        for outlet, series in agg.items()
    }
    by_group: dict[str, list[ShareSeries]] = {}
    for outlet in sorted(shares):
        by_group.setdefault(groups[outlet], []).append(shares[outlet])

    out: dict[str, IndexSeries] = {}
    for group in sorted(by_group):
        if group in cfg.sd100_groups:
            if len(by_group[group]) != 1:
                raise ConfigError(
                    f"sd100 group {group!r} must have exactly one outlet"
                )
            out[group] = index.normalize_mean100(
                by_group[group][0], win, label=group, rescale_sd=True
            )
        else:
            out[group] = index.build_index(by_group[group], win, label=group)
    out["pooled"] = index.build_index(
        [shares[o] for o in sorted(shares)], win, label="pooled"
    )
    return out


def cmd_index(cfg: RunConfig) -> int:
    indices = _build_indices(cfg)
    meta = cfg.metadata()
    for name, ix in indices.items():
        src = f"series: {name}"
        _write_text(
            cfg.out / "index" / f"{name}.csv",
            lambda f, ix=ix, src=src: index.write_series_csv(
                ix.label, ix.periods, ix.values, f, meta + [src]
            ),
        )
    print(f"index: wrote {len(indices)} series -> {cfg.out / 'index'}")
    return 0


def _build_panel(cfg: RunConfig) -> var.Panel:
    """Quarterly panel from the group indices and external series."""
    indices = _build_indices(cfg)
    win_q = cfg.window(periods.QUARTERLY)

    columns: dict[str, ShareSeries] = {}
    for name, ix in indices.items():
        s = index.index_to_share(ix)
        if s.granularity == periods.MONTHLY:
            s = index.to_quarterly(s)
        elif s.granularity != periods.QUARTERLY:
            raise ConfigError(f"index {name!r} is {s.granularity}; need quarterly")
        columns[name] = s
    for name, ext in sorted(cfg.external_series.items()):
        s = index.read_series_csv(ext.path, label=name)
        if s.granularity == periods.MONTHLY:
            s = index.to_quarterly(s)
        elif s.granularity != periods.QUARTERLY:
            raise ConfigError(f"series {name!r} is {s.granularity}; need quarterly")
        if ext.normalize_mean100:
            ix = index.normalize_mean100(s, win_q, label=name)
            s = index.index_to_share(ix)
        columns[name] = s

    names = cfg.variables
    if names is None:
        names = sorted(n for n in columns if n != "pooled")
    missing = [n for n in names if n not in columns]
    if missing:
        raise ConfigError(f"panel variables not available: {missing}")

    defined: list[set[int]] = []
    for n in names:
        s = columns[n]
        defined.append(
            {p.ordinal for p, v in zip(s.periods, s.values) if v is not None}
        )
    common = set.intersection(*defined) if defined else set()
    if win_q is not None:
        common &= set(range(win_q[0].ordinal, win_q[1].ordinal + 1))
    if len(common) < 2:
        raise UnbalancedPanelError(
            f"only {len(common)} common defined quarter(s) across {names}"
        )
    ords = sorted(common)
    if ords[-1] - ords[0] + 1 != len(ords):
        raise UnbalancedPanelError(
            "common defined quarters are not contiguous; panel is unbalanced"
        )
    grid = [periods.from_ordinal(periods.QUARTERLY, o) for o in ords]
    data = np.empty((len(grid), len(names)))
    for j, n in enumerate(names):
        s = columns[n]
        lookup = {p.ordinal: v for p, v in zip(s.periods, s.values)}
        data[:, j] = [lookup[o] for o in ords]
    return var.Panel(tuple(names), periods.QUARTERLY, tuple(grid), data)


def cmd_panel(cfg: RunConfig) -> int:
    panel = _build_panel(cfg)
    _write_text(
        cfg.out / "panel" / "panel.csv",
        lambda f: var.write_panel_csv(panel, f, cfg.metadata()),
    )
    print(
        f"panel: {panel.T} quarters x {panel.k} variables "
        f"({panel.periods[0]}..{panel.periods[-1]}) -> {cfg.out / 'panel'}"
    )
    return 0


def _load_or_build_panel(cfg: RunConfig) -> var.Panel:
    path = cfg.out / "panel" / "panel.csv"
    if path.exists():
        return var.read_panel_csv(path)
    return _build_panel(cfg)


def cmd_estimate(cfg: RunConfig) -> int:
    panel = _load_or_build_panel(cfg)
    fit = var.estimate_ols(panel, cfg.lags)
    meta = cfg.metadata()
    var.save_fit(fit, _ensure_dir(cfg.out / "var") / "fit.json", meta)
    rows = var.format_table(fit)
    _write_text(
        cfg.out / "var" / "table.csv",
        lambda f: var.render_table_csv(rows, f, meta),
    )
    _write_text(
        cfg.out / "var" / "table.txt",
        lambda f: var.render_table_text(rows, f, meta),
    )
    radius = var.stability(fit)
    print(
        f"estimate: VAR({fit.p}) on {fit.k} variables, T_eff={fit.T_eff}, "
        f"dof={fit.dof}"
    )
    print(
        f"stability radius: {radius:.4f} "
        f"({'stable' if radius < 1 else 'NOT stable'})"
    )
    for lag in range(fit.p):
        pv = fit.pvalue_pi[lag]
        print(
            f"lag {lag + 1}: {int((pv < 0.01).sum())} coef p<0.01, "
            f"{int((pv < 0.05).sum())} p<0.05, {int((pv < 0.10).sum())} p<0.10 "
            f"of {fit.k * fit.k}"
        )
    return 0


def _ensure_dir(d: Path) -> Path:
    d.mkdir(parents=True, exist_ok=True)
    return d


def _game_for_simulation(cfg: RunConfig) -> normgame.GroupGame:
    if cfg.game is not None:
        if not cfg.game.exists():
            raise ConfigError(f"game config not found: {cfg.game}")
        try:
            return normgame.load_game(cfg.game)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{cfg.game}: invalid JSON ({exc})") from None
    fit_path = cfg.out / "var" / "fit.json"
    if not fit_path.exists():
        raise ConfigError(
            "simulate needs a game config or an estimated fit "
            f"(none at {fit_path})"
        )
    fit = var.load_fit(fit_path)
    if fit.p != 1:
        raise InvalidGameError(
            f"only a one-lag fit maps back to a game; fit has p={fit.p}"
        )
    return normgame.from_var_params(
        fit.constants, fit.pi[0], group_names=fit.variable_names
    )


def cmd_simulate(cfg: RunConfig) -> int:
    game = _game_for_simulation(cfg)
    a0 = (
        np.zeros(game.n_groups)
        if cfg.sim_start is None
        else np.asarray(cfg.sim_start, dtype=np.float64)
    )
    if a0.shape != (game.n_groups,):
        raise ConfigError(
            f"sim_start must have {game.n_groups} entries, got {a0.shape}"
        )
    traj = normgame.simulate(game, a0, cfg.sim_steps)
    ss = normgame.steady_state(game)
    meta = cfg.metadata()
    _write_text(
        cfg.out / "sim" / "trajectory.csv",
        lambda f: normgame.write_trajectory_csv(game, traj, f, meta),
    )
    report = {
        "_metadata": meta,
        "groups": list(game.group_names),
        "spectral_radius": ss.spectral_radius,
        "divergent": ss.divergent,
        "steady_state": None if ss.divergent else ss.values.tolist(),
        "trajectory_diverged": traj.diverged,
        "steps": int(traj.times[-1]) if len(traj.times) else 0,
    }
    with open(cfg.out / "sim" / "steady_state.json", "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"simulate: spectral radius {ss.spectral_radius:.4f}")
    if ss.divergent:
        print("steady state: divergent (radius >= 1)")
    else:
        pairs = ", ".join(
            f"{n}={v:.4f}" for n, v in zip(game.group_names, ss.values)
        )
        print(f"steady state: {pairs}")
    if traj.diverged:
        print(f"trajectory diverged after {int(traj.times[-1])} step(s)")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    rc = cmd_count(cfg)
    if rc:
        return rc
    rc = cmd_index(cfg)
    if rc:
        return rc
    rc = cmd_panel(cfg)
    if rc:
        return rc
    rc = cmd_estimate(cfg)
    if rc:
        return rc
    if cfg.game is not None or cfg.lags == 1:
        rc = cmd_simulate(cfg)
        if rc:
            return rc
    else:
        print("simulate: skipped (no game config and fit has p != 1)")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "count": cmd_count,
    "index": cmd_index,
    "panel": cmd_panel,
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON (or TOML on 3.11+) run config")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--window-start", help="normalization window start period")
    common.add_argument("--window-end", help="normalization window end period")
    common.add_argument(
        "--granularity",
        choices=periods.GRANULARITIES,
        help="corpus/index period granularity",
    )
    common.add_argument("--lags", type=int, help="VAR lag order (1..8)")

    parser = argparse.ArgumentParser(
        prog="attnflow",
        description="Attention indices, VAR estimation, and norm-game dynamics.",
    )
    parser.add_argument(
        "--version", action="version", version=f"attnflow {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "count": "per-outlet mention counts and count tables",
        "index": "normalized attention indices per group",
        "panel": "assemble the quarterly estimation panel",
        "estimate": "estimate the VAR and emit coefficient tables",
        "simulate": "simulate the norm game / a one-lag fit",
        "report": "run every stage end to end",
    }
    for name, fn in _COMMANDS.items():
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        return _COMMANDS[args.command](cfg)
    except (ConfigError, DocumentsCsvError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except DateSanityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATE_SANITY
    except SeriesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INDEX
    except VarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except GameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GAME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
