"""Command-line entry point and the reproducible ``run`` pipeline.

Exit codes: 0 ok, 2 configuration error, 3 input error, 4 stage failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import pandas as pd
import yaml

from . import __version__
from .classify import EntityRuleSet, classify_corpus, read_matches, write_matches
from .errors import ConfigError, InputError
from .ingest import CorpusStore, corpus_stats, expand_inputs, ingest_files, page_table, segment_table
from .metrics import (cdf_report, entity_breakdown, matches_frame, monthly_area_ratio,
                      monthly_spend, parity_report, placement_report, spend_summary,
                      topic_report, weekday_area_profile)
from .panel import BUCKETS, build_panel, read_panel, read_popularity, attach_popularity, write_panel
from .pricing import RateCard, price_table
from .regression import RegressionSpec, fit
from .synth import truth_json, write_synthetic_corpus

log = logging.getLogger("printads")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_STAGE = 0, 2, 3, 4
STAGES = ("ingest", "classify", "price", "report", "regress")
REPORTS = ("placement", "cdf", "timeseries", "weekday", "breakdown", "topics", "spend",
           "monthly_spend", "parity")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# -- small helpers ----------------------------------------------------------------

def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write(path: Path, write: Callable[[Path], None]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    write(tmp)
    os.replace(tmp, path)


def write_csv(df: pd.DataFrame, path: str | Path) -> None:
    def dump(tmp: Path) -> None:
        out = df.copy()
        for col in out.columns:
            if pd.api.types.is_datetime64_any_dtype(out[col]):
                out[col] = out[col].dt.strftime("%Y-%m-%d")
        out.to_csv(tmp, index=False, lineterminator="\n")
    _atomic_write(Path(path), dump)


def write_json(obj: Any, path: str | Path) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n"
    _atomic_write(Path(path), lambda tmp: tmp.write_text(text, encoding="utf-8"))


def _read_priced(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path, parse_dates=["date"], dtype={"segment_id": str, "source": str, "city": str})
    df["unpriceable"] = df["unpriceable"].astype(bool)
    return df


# -- stage bodies shared by the subcommands and the pipeline -------------------------

def load_tables(store: CorpusStore) -> tuple[pd.DataFrame, pd.DataFrame]:
    pages = list(store.pages())
    return page_table(pages), segment_table(pages)


def make_report(kind: str, *, pages: pd.DataFrame, segments: pd.DataFrame,
                priced: pd.DataFrame, matches: pd.DataFrame,
                sectors: dict[str, str] | None = None) -> pd.DataFrame:
    if kind == "placement":
        return placement_report(priced, matches)
    if kind == "cdf":
        return cdf_report(priced, matches)
    if kind == "timeseries":
        return monthly_area_ratio(pages, by_source=True)
    if kind == "weekday":
        return weekday_area_profile(pages)
    if kind == "breakdown":
        parts = entity_breakdown(priced, matches, sectors)
        frames = []
        for name, df in parts.items():
            frames.append(df.assign(table=name))
        out = pd.concat(frames, ignore_index=True)
        return out[["table", *[c for c in out.columns if c != "table"]]]
    if kind == "topics":
        return topic_report(segments)
    if kind == "spend":
        return spend_summary(priced, matches)
    if kind == "monthly_spend":
        return monthly_spend(priced, matches)
    if kind == "parity":
        return parity_report(priced, matches)
    raise ConfigError(f"unknown report kind {kind!r}; choose from {', '.join(REPORTS)}")


# -- run pipeline -------------------------------------------------------------------

@dataclass
class StageRecord:
    name: str
    started: str
    finished: str
    outputs: dict[str, str]
    digest: str


@dataclass
class RunManifest:
    config_hash: str
    version: str
    inputs: dict[str, str]
    stages: list[StageRecord] = field(default_factory=list)
    started: str = ""
    finished: str = ""

    def stage_digests(self) -> dict[str, str]:
        return {s.name: s.digest for s in self.stages}

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RegressionJob:
    name: str
    entity_class: str
    dep: str
    fe: str
    cluster: str = "entity"
    popularity: bool = False


@dataclass(frozen=True)
class RunConfig:
    inputs: tuple[str, ...]
    out: Path
    store: Path
    stages: tuple[str, ...] = STAGES
    rules: str | None = None
    rates: str | None = None
    popularity: str | None = None
    bucket: str = "month"
    reports: tuple[str, ...] = REPORTS
    regressions: tuple[RegressionJob, ...] = ()
    dedup: bool = True
    jobs: int = 1
    raw: str = ""

    @classmethod
    def from_mapping(cls, raw: dict, base: Path, text: str = "") -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        known = {"inputs", "out", "store", "stages", "rules", "rates", "popularity", "bucket",
                 "reports", "regressions", "dedup", "jobs"}
        extra = sorted(set(raw) - known)
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(extra)}")
        for key in ("inputs", "out"):
            if key not in raw:
                raise ConfigError(f"config lacks required key {key!r}")

        def resolve(p):
            return None if p is None else str((base / p) if not Path(p).is_absolute() else Path(p))

        inputs = raw["inputs"]
        inputs = [inputs] if isinstance(inputs, str) else list(inputs)
        stages = tuple(raw.get("stages", STAGES))
        unknown = [s for s in stages if s not in STAGES]
        if unknown:
            raise ConfigError(f"unknown stage(s) {', '.join(map(str, unknown))}; "
                              f"valid stages are {', '.join(STAGES)}")
        order = [STAGES.index(s) for s in stages]
        if order != sorted(order) or len(set(order)) != len(order):
            raise ConfigError(f"stages must be a subsequence of {', '.join(STAGES)}")
        reports = tuple(raw.get("reports", REPORTS))
        bad = [r for r in reports if r not in REPORTS]
        if bad:
            raise ConfigError(f"unknown report kind(s) {', '.join(map(str, bad))}")
        bucket = raw.get("bucket", "month")
        if bucket not in BUCKETS:
            raise ConfigError(f"bucket must be one of {BUCKETS}")
        jobs = []
        for i, item in enumerate(raw.get("regressions") or []):
            try:
                job = RegressionJob(**item)
                RegressionSpec.from_flags(job.dep, job.fe, job.popularity, job.cluster)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"regressions[{i}]: {exc}") from None
            if job.entity_class not in ("government", "companies"):
                raise ConfigError(f"regressions[{i}]: entity_class must be government or companies")
            jobs.append(job)
        if len({j.name for j in jobs}) != len(jobs):
            raise ConfigError("regression names must be unique")
        out = Path(resolve(raw["out"]))
        n_jobs = raw.get("jobs", 1)
        if not isinstance(n_jobs, int) or n_jobs < 1:
            raise ConfigError("jobs must be a positive integer")
        return cls(inputs=tuple(resolve(p) for p in inputs), out=out,
                   store=Path(resolve(raw.get("store")) or out / "store"), stages=stages,
                   rules=resolve(raw.get("rules")), rates=resolve(raw.get("rates")),
                   popularity=resolve(raw.get("popularity")), bucket=bucket, reports=reports,
                   regressions=tuple(jobs), dedup=bool(raw.get("dedup", True)), jobs=n_jobs,
                   raw=text)

    @classmethod
    def load(cls, path: str | Path, overrides: dict | None = None) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
        raw = dict(raw or {})
        raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_mapping(raw, path.parent, text + json.dumps(overrides or {}, sort_keys=True))


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _digest_outputs(paths: list[Path], root: Path) -> tuple[dict[str, str], str]:
    digests = {}
    for p in sorted(paths):
        try:
            key = p.relative_to(root).as_posix()
        except ValueError:
            key = p.as_posix()
        digests[key] = sha256_file(p)
    combined = hashlib.sha256("".join(f"{k}\0{v}\n" for k, v in digests.items()).encode()).hexdigest()
    return digests, combined


def run_pipeline(config: RunConfig) -> RunManifest:
    """Run the configured stages in order and write ``manifest.json`` under ``out``.

    Inputs are checked before anything runs. A failing stage raises
    StageError; files written by earlier stages are left as they are.
    """
    paths = expand_inputs(config.inputs)
    for p in (config.rules, config.rates, config.popularity):
        if p is not None and not Path(p).exists():
            raise InputError(f"configured file {p} does not exist")
    manifest = RunManifest(
        config_hash=hashlib.sha256(config.raw.encode("utf-8")).hexdigest(),
        version=__version__,
        inputs={p: sha256_file(p) for p in paths},
        started=_now(),
    )
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    store = CorpusStore(config.store)
    ctx: dict[str, Any] = {}

    def rules() -> EntityRuleSet:
        if "rules" not in ctx:
            ctx["rules"] = EntityRuleSet.load(config.rules)
        return ctx["rules"]

    def tables() -> tuple[pd.DataFrame, pd.DataFrame]:
        if "tables" not in ctx:
            ctx["tables"] = load_tables(store)
        return ctx["tables"]

    def matches() -> pd.DataFrame:
        if "matches" not in ctx:
            ctx["matches"] = matches_frame(read_matches(out / "matches.jsonl"))
        return ctx["matches"]

    def priced() -> pd.DataFrame:
        if "priced" not in ctx:
            ctx["priced"] = _read_priced(out / "priced.csv")
        return ctx["priced"]

    def stage_ingest() -> list[Path]:
        violations, written, skipped = ingest_files(paths, store, dedup=config.dedup, jobs=config.jobs)
        log.info("ingest: %d editions written, %d skipped, %d violations", written, skipped,
                 len(violations))
        write_json([{"record": v.record, "rule": v.rule, "detail": v.detail} for v in violations],
                   out / "violations.json")
        write_csv(corpus_stats(store), out / "corpus_stats.csv")
        return [*store.files(), out / "violations.json", out / "corpus_stats.csv"]

    def stage_classify() -> list[Path]:
        n = write_matches(classify_corpus(store, rules()), out / "matches.jsonl")
        log.info("classify: %d segments classified", n)
        return [out / "matches.jsonl"]

    def stage_price() -> list[Path]:
        df = price_table(tables()[1], RateCard.load(config.rates))
        write_csv(df.drop(columns=["text"]), out / "priced.csv")
        return [out / "priced.csv"]

    def stage_report() -> list[Path]:
        pages, segments = tables()
        written = []
        for kind in config.reports:
            df = make_report(kind, pages=pages, segments=segments, priced=priced(),
                             matches=matches(), sectors=rules().sectors)
            path = out / "reports" / f"{kind}.csv"
            write_csv(df, path)
            written.append(path)
        return written

    def stage_regress() -> list[Path]:
        pages, segments = tables()
        popularity = read_popularity(config.popularity) if config.popularity else None
        panels: dict[str, pd.DataFrame] = {}
        written = []
        results = {}
        for job in config.regressions:
            if job.entity_class not in panels:
                panel = build_panel(segments, priced(), matches(), config.bucket, job.entity_class,
                                    popularity, pages)
                path = out / "panels" / f"{job.entity_class}_{config.bucket}.csv"
                _atomic_write(path, lambda tmp: write_panel(panel, tmp))
                written.append(path)
                panels[job.entity_class] = read_panel(path)
            spec = RegressionSpec.from_flags(job.dep, job.fe, job.popularity, job.cluster)
            results[job.name] = fit(spec, panels[job.entity_class]).to_json()
        write_json(results, out / "regressions.json")
        return [*written, out / "regressions.json"]

    bodies = {"ingest": stage_ingest, "classify": stage_classify, "price": stage_price,
              "report": stage_report, "regress": stage_regress}
    for name in config.stages:
        started = _now()
        log.info("stage %s", name)
        try:
            outputs = bodies[name]()
        except (ConfigError, InputError):
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        digests, combined = _digest_outputs(outputs, out)
        manifest.stages.append(StageRecord(name, started, _now(), digests, combined))
    manifest.finished = _now()
    write_json(manifest.to_json(), out / "manifest.json")
    return manifest


# -- argument parsing ---------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--store", help="corpus store directory")
    p.add_argument("--config", help="YAML run config; flags override its values")
    p.add_argument("--seed", type=int, help="random seed for generated data")
    p.add_argument("--jobs", type=int, help="worker processes for parsing")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="printads", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse JSONL page records into a corpus store")
    _common(p)
    p.add_argument("--input", nargs="+", required=True, help="JSONL files or glob patterns")
    p.add_argument("--dedup", action="store_true", help="skip editions already in the store")
    p.add_argument("--strict", action="store_true", help="exit 3 if any record was rejected")

    p = sub.add_parser("classify", help="match ads and articles against the keyword rules")
    _common(p)
    p.add_argument("--rules", help="rule YAML (defaults to the shipped tables)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("price", help="attach page category, scaling factor and cost to ads")
    _common(p)
    p.add_argument("--rates", help="rate card CSV (defaults to the shipped card)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("report", help="descriptive CSV reports")
    _common(p)
    p.add_argument("kind", choices=REPORTS)
    p.add_argument("--matches", help="matches.jsonl from classify")
    p.add_argument("--priced", help="priced.csv from price; computed on the fly if absent")
    p.add_argument("--rates")
    p.add_argument("--rules")
    p.add_argument("--out", required=True)

    p = sub.add_parser("panel", help="build an entity x source x period panel CSV")
    _common(p)
    p.add_argument("--matches", required=True)
    p.add_argument("--priced")
    p.add_argument("--rates")
    p.add_argument("--entity-class", choices=("government", "companies"), default="companies")
    p.add_argument("--bucket", choices=BUCKETS, default="month")
    p.add_argument("--popularity", help="CSV with entity, period, popularity")
    p.add_argument("--out", required=True)

    p = sub.add_parser("regress", help="fixed-effects panel regression")
    _common(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--dep", choices=("sentiment", "count", "mean"), default="sentiment")
    p.add_argument("--fe", choices=("none", "group", "time", "both"), default="both")
    p.add_argument("--popularity", help="popularity CSV; adds popularity as a regressor")
    p.add_argument("--cluster", choices=("entity", "company", "source"), default="entity")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="write a seeded synthetic corpus")
    _common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--pages", type=int, default=10_000)

    p = sub.add_parser("run", help="run the configured pipeline and write a manifest")
    _common(p)
    p.add_argument("--out", help="override the config's output directory")
    return parser


def _store(args) -> CorpusStore:
    if not args.store:
        raise ConfigError("--store is required")
    store = CorpusStore(args.store)
    if args.command != "ingest" and len(store) == 0:
        raise InputError(f"store {args.store} is empty or missing")
    return store


def _priced_for(args, segments: pd.DataFrame) -> pd.DataFrame:
    if args.priced:
        if not Path(args.priced).exists():
            raise InputError(f"{args.priced} does not exist")
        return _read_priced(args.priced)
    return price_table(segments, RateCard.load(args.rates))


def _matches_for(args) -> pd.DataFrame:
    if not Path(args.matches).exists():
        raise InputError(f"{args.matches} does not exist")
    return matches_frame(read_matches(args.matches))


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "run":
        if not args.config:
            raise ConfigError("run needs --config")
        overrides = {"out": args.out, "store": args.store, "jobs": args.jobs}
        manifest = run_pipeline(RunConfig.load(args.config, overrides))
        for name, digest in manifest.stage_digests().items():
            print(f"{name}\t{digest}")
        return EXIT_OK

    if cmd == "synth":
        truth = write_synthetic_corpus(args.out, seed=args.seed if args.seed is not None else 0,
                                       n_pages=args.pages)
        Path(str(args.out) + ".truth.json").write_text(truth_json(truth) + "\n", encoding="utf-8")
        print(f"wrote {truth.pages} pages in {truth.editions} editions to {args.out}")
        return EXIT_OK

    if cmd == "regress":
        if not Path(args.panel).exists():
            raise InputError(f"{args.panel} does not exist")
        try:
            panel = read_panel(args.panel)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        if args.popularity:
            panel = attach_popularity(panel, read_popularity(args.popularity))
        spec = RegressionSpec.from_flags(args.dep, args.fe, bool(args.popularity), args.cluster)
        write_json(fit(spec, panel).to_json(), args.out)
        return EXIT_OK

    store = _store(args)
    if cmd == "ingest":
        violations, written, skipped = ingest_files(args.input, store, dedup=args.dedup,
                                                    jobs=args.jobs or 1)
        for v in violations:
            log.warning("%s", v)
        print(corpus_stats(store).to_string(index=False))
        print(f"{written} editions written, {skipped} skipped, {len(violations)} records rejected")
        return EXIT_INPUT if (args.strict and violations) else EXIT_OK

    if cmd == "classify":
        n = write_matches(classify_corpus(store, EntityRuleSet.load(args.rules)), args.out)
        print(f"{n} segments classified")
        return EXIT_OK

    pages, segments = load_tables(store)
    if cmd == "price":
        df = price_table(segments, RateCard.load(args.rates))
        write_csv(df.drop(columns=["text"]), args.out)
        return EXIT_OK

    if cmd == "report":
        needs_matches = args.kind not in ("timeseries", "weekday", "topics")
        if needs_matches and not args.matches:
            raise ConfigError(f"report {args.kind} needs --matches")
        matches = _matches_for(args) if needs_matches else None
        priced = _priced_for(args, segments) if needs_matches else None
        sectors = EntityRuleSet.load(args.rules).sectors
        write_csv(make_report(args.kind, pages=pages, segments=segments, priced=priced,
                              matches=matches, sectors=sectors), args.out)
        return EXIT_OK

    if cmd == "panel":
        popularity = read_popularity(args.popularity) if args.popularity else None
        panel = build_panel(segments, _priced_for(args, segments), _matches_for(args), args.bucket,
                            args.entity_class, popularity, pages)
        write_panel(panel, args.out)
        return EXIT_OK
    raise ConfigError(f"unknown command {cmd}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
