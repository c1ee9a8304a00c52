"""Pipeline orchestration for the `pulse` command.

Each subcommand is one isolated stage: it reads only its named inputs,
writes only its named outputs (atomically), and records a manifest with
input digests, a config hash, and seeds. Re-running a stage on the same
inputs reproduces its CSV/JSONL/SVG outputs byte for byte, at any
thread count.

Exit codes: 0 on success, 2 on a contract violation (bad input data or
arguments), 3 on a sidecar transport failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import shlex
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

from . import __version__
from .content import (
    ENTITY_CLASSES,
    EntityMention,
    embed,
    entity_frequencies,
    heuristic_entities,
    read_embedding_cache,
    write_embedding_cache,
)
from .demographics import (
    build_profiles,
    load_healthcare_lexicon,
    load_m3_predictions,
    load_roster,
)
from .errors import ContractError, LoadError, TransportError
from .geo import load_gazetteer, resolve
from .kmeans import kmeans, representatives
from .lexicon import DrugId, load_lexicon, match_drugs
from .manifest import RunManifest, atomic_write_text
from .pca import pca_fit_transform
from .records import (
    MalformedLine,
    REJECTION_REASONS,
    TweetRecord,
    filter_corpus,
    merge_corpora,
    open_jsonl,
    parse_records,
    record_from_dict,
    record_to_dict,
)
from .stance import (
    CLASS_ORDER,
    ClassifierHandle,
    StanceLabel,
    classify,
    evaluate,
    load_cue_table,
    load_stance_dataset,
    sample_indices,
)
from .stats import (
    DEFAULT_DEAD_ZONE,
    StateWaveStance,
    contingency,
    format_p,
    pearson_chi_square,
    state_stance_summary,
)
from .svg import stance_share_chart, state_grid_chart, trend_chart
from .synth import generate
from .timeline import STUDY_END, STUDY_START, Wave, build_trend, load_case_table, trend_rows, wave_of

log = logging.getLogger("pulse")

T = TypeVar("T")
U = TypeVar("U")


# ---------------------------------------------------------------------------
# shared plumbing

def load_config(path: str | Path) -> dict[str, str]:
    """Flat `key = value` file; blank lines and # comments ignored."""
    p = Path(path)
    if not p.exists():
        raise LoadError(f"config file not found: {p}")
    out: dict[str, str] = {}
    for i, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise LoadError(f"{p}:{i}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _parse_bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("true", "1", "on", "yes"):
        return True
    if v in ("false", "0", "off", "no"):
        return False
    raise ContractError(f"not a boolean: {raw!r}")


def _opt(args: argparse.Namespace, key: str, default: T, cast: Callable[[str], T]) -> T:
    """Resolve an option: CLI flag, then config file, then default."""
    v = getattr(args, key.replace("-", "_"), None)
    if v is not None:
        return v
    cfg: dict[str, str] = getattr(args, "_cfg", {})
    if key in cfg:
        try:
            return cast(cfg[key])
        except (ValueError, TypeError):
            raise ContractError(f"config key {key!r}: bad value {cfg[key]!r}") from None
    return default


def _threads(args: argparse.Namespace) -> int:
    n = _opt(args, "threads", 0, int)
    if n == 0:
        raw = os.environ.get("PULSE_THREADS", "1")
        try:
            n = int(raw)
        except ValueError:
            raise ContractError(f"PULSE_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ContractError(f"thread count must be >= 1, got {n}")
    return n


def _pmap(fn: Callable[[T], U], items: Sequence[T], threads: int) -> list[U]:
    """Order-preserving map; results are identical at any thread count."""
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _require(*paths: Path | None) -> None:
    """Fail with a contract error before any manifest or output writes."""
    for p in paths:
        if p is not None and not Path(p).exists():
            raise LoadError(f"file not found: {p}")


def _read_objs(path: str | Path) -> list[dict]:
    p = Path(path)
    if not p.exists():
        raise LoadError(f"file not found: {p}")
    objs: list[dict] = []
    with open_jsonl(p) as f:
        for i, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                objs.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise LoadError(f"{p}:{i}: bad JSON: {e}") from None
    return objs


def _records_of(objs: list[dict], path: Path) -> list[TweetRecord]:
    try:
        return [record_from_dict(o) for o in objs]
    except MalformedLine as e:
        raise LoadError(f"{path}: {e}") from None


def _write_csv(path: Path, header: str, rows: Iterable[str]) -> None:
    atomic_write_text(path, "\n".join([header, *rows]) + "\n")


def _stage_manifest(out_dir: Path, stage: str, config: dict) -> RunManifest:
    man = RunManifest(out_dir / f"{stage}.manifest.json")
    man.set_config({k: str(v) for k, v in config.items()})
    return man


def _read_stance_csv(path: str | Path) -> dict[str, StanceLabel]:
    p = Path(path)
    if not p.exists():
        raise LoadError(f"file not found: {p}")
    out: dict[str, StanceLabel] = {}
    with open(p, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"tweet_id", "stance"} <= set(reader.fieldnames):
            raise LoadError(f"{p}: expected columns tweet_id,drug,stance,numeric")
        for i, row in enumerate(reader, start=2):
            try:
                out[row["tweet_id"]] = StanceLabel(row["stance"])
            except ValueError:
                raise LoadError(f"{p}:{i}: unknown stance {row['stance']!r}") from None
    return out


# ---------------------------------------------------------------------------
# stages

def stage_ingest(inputs: list[Path], out_dir: Path) -> None:
    t0 = time.perf_counter()
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _stage_manifest(out_dir, "ingest", {"inputs": ",".join(map(str, inputs))})
    shards = []
    for p in inputs:
        if not p.exists():
            raise LoadError(f"file not found: {p}")
        man.record_input(p)
        with open_jsonl(p) as f:
            recs, malformed = parse_records(f)
        shards.append(filter_corpus(recs, (STUDY_START, STUDY_END), malformed))
    corpus = merge_corpora(shards) if len(shards) > 1 else shards[0]

    filtered = out_dir / "filtered.jsonl"
    lines = (json.dumps(record_to_dict(r), sort_keys=True, ensure_ascii=False)
             for r in corpus.records)
    atomic_write_text(filtered, "".join(f"{line}\n" for line in lines))
    rej = out_dir / "rejections.csv"
    _write_csv(rej, "reason,count",
               (f"{r},{corpus.rejection_counts[r]}" for r in REJECTION_REASONS))
    man.record_output("ingest", filtered)
    man.record_output("ingest", rej)
    man.record_timing("ingest", time.perf_counter() - t0)
    man.save()
    log.info("ingest: kept %d records, rejected %s",
             len(corpus.records), dict(corpus.rejection_counts))


def stage_match(in_path: Path, out_dir: Path, lexicon_path: Path | None, threads: int) -> None:
    t0 = time.perf_counter()
    _require(in_path, lexicon_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _stage_manifest(out_dir, "match",
                          {"in": in_path, "lexicon": lexicon_path or "bundled", "threads": threads})
    man.record_input(in_path)
    if lexicon_path:
        man.record_input(lexicon_path)
    objs = _read_objs(in_path)
    recs = _records_of(objs, in_path)
    lex = load_lexicon(lexicon_path)
    matches = _pmap(lambda r: match_drugs(r.text, lex), recs, threads)

    matched = 0
    excluded_multi = 0
    no_mention = 0
    out_lines: list[str] = []
    for obj, drugs in zip(objs, matches):
        if len(drugs) == 1:
            matched += 1
            row = dict(obj)
            row["drug"] = next(iter(drugs)).value
            out_lines.append(json.dumps(row, sort_keys=True, ensure_ascii=False))
        elif len(drugs) > 1:
            excluded_multi += 1
        else:
            no_mention += 1
    if matched + excluded_multi + no_mention != len(objs):
        raise ContractError("match conservation failed")  # pragma: no cover

    matched_path = out_dir / "matched.jsonl"
    atomic_write_text(matched_path, "".join(f"{line}\n" for line in out_lines))
    stats_path = out_dir / "match_stats.csv"
    _write_csv(stats_path, "metric,count",
               (f"matched,{matched}", f"excluded_multi,{excluded_multi}",
                f"no_mention,{no_mention}"))
    man.record_output("match", matched_path)
    man.record_output("match", stats_path)
    man.record_timing("match", time.perf_counter() - t0)
    man.save()
    log.info("match: %d matched, %d multi-drug excluded, %d without mention",
             matched, excluded_multi, no_mention)


def stage_geo(in_path: Path, out_dir: Path, gazetteer_path: Path | None, threads: int) -> None:
    t0 = time.perf_counter()
    _require(in_path, gazetteer_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _stage_manifest(out_dir, "geo",
                          {"in": in_path, "gazetteer": gazetteer_path or "bundled",
                           "threads": threads})
    man.record_input(in_path)
    if gazetteer_path:
        man.record_input(gazetteer_path)
    objs = _read_objs(in_path)
    recs = _records_of(objs, in_path)
    gaz = load_gazetteer(gazetteer_path)
    results = _pmap(lambda r: resolve(r, gaz), recs, threads)

    counts = {"resolved_gps": 0, "resolved_profile": 0, "unresolved": 0}
    out_lines: list[str] = []
    for obj, res in zip(objs, results):
        if res is None:
            counts["unresolved"] += 1
            continue
        state, source = res
        counts[f"resolved_{source}"] += 1
        row = dict(obj)
        row["state"] = state
        row["geo_source"] = source
        out_lines.append(json.dumps(row, sort_keys=True, ensure_ascii=False))

    geo_path = out_dir / "geotagged.jsonl"
    atomic_write_text(geo_path, "".join(f"{line}\n" for line in out_lines))
    stats_path = out_dir / "geo_stats.csv"
    _write_csv(stats_path, "metric,count", (f"{k},{v}" for k, v in counts.items()))
    man.record_output("geo", geo_path)
    man.record_output("geo", stats_path)
    man.record_timing("geo", time.perf_counter() - t0)
    man.save()
    log.info("geo: %s", counts)


def stage_stance(
    in_path: Path,
    out_dir: Path,
    classifier: str,
    masking: bool,
    cues_path: Path | None,
    sidecar_cmd: str | None,
    threads: int,
) -> None:
    t0 = time.perf_counter()
    _require(in_path, cues_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _stage_manifest(out_dir, "stance",
                          {"in": in_path, "classifier": classifier, "masking": masking,
                           "cues": cues_path or "bundled", "threads": threads})
    man.record_input(in_path)
    objs = _read_objs(in_path)
    texts = [o["text"] for o in objs]
    lex = load_lexicon()

    if classifier == "sidecar":
        if not sidecar_cmd:
            raise ContractError("--sidecar-cmd is required with --classifier sidecar")
        from .sidecar import SidecarClient

        with SidecarClient(shlex.split(sidecar_cmd)) as client:
            handle = ClassifierHandle(kind="sidecar", masking=masking, client=client)
            labels = classify(texts, handle, lex)
    else:
        handle = ClassifierHandle(
            kind="rule-baseline", masking=masking, cues=load_cue_table(cues_path)
        )
        labels = _pmap(lambda t: classify([t], handle, lex)[0], texts, threads)

    stance_path = out_dir / "stance.csv"
    _write_csv(
        stance_path, "tweet_id,drug,stance,numeric",
        (f"{o['id']},{o['drug']},{lab.value},{lab.numeric()}"
         for o, lab in zip(objs, labels)),
    )
    man.record_output("stance", stance_path)
    man.record_timing("stance", time.perf_counter() - t0)
    man.save()
    shares = {s.value: labels.count(s) for s in CLASS_ORDER}
    log.info("stance: %d tweets labeled %s", len(labels), shares)


def stage_trend(in_path: Path, cases_path: Path, out_dir: Path, region: str) -> None:
    t0 = time.perf_counter()
    _require(in_path, cases_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _stage_manifest(out_dir, "trend",
                          {"in": in_path, "cases": cases_path, "region": region})
    man.record_input(in_path)
    man.record_input(cases_path)
    objs = _read_objs(in_path)
    recs = _records_of(objs, in_path)
    partitions: dict[DrugId, list[TweetRecord]] = {d: [] for d in DrugId}
    for obj, rec in zip(objs, recs):
        partitions[DrugId(obj["drug"])].append(rec)
    cumulative = load_case_table(cases_path, region)
    series = build_trend(partitions, cumulative)

    trend_path = out_dir / "trend.csv"
    _write_csv(trend_path, "week_start,drug,tweet_count,new_cases",
               (",".join(map(str, row)) for row in trend_rows(series)))
    svg_path = out_dir / "trend.svg"
    if series.weeks:
        atomic_write_text(svg_path, trend_chart(series))
        man.record_output("trend", svg_path)
    else:
        log.warning("trend: no weeks to chart, skipping %s", svg_path)
    man.record_output("trend", trend_path)
    man.record_timing("trend", time.perf_counter() - t0)
    man.save()
    log.info("trend: %d weeks x %d drugs", len(series.weeks), len(series.counts))


def stage_cluster(
    in_path: Path,
    stance_path: Path,
    out_dir: Path,
    embedder: str,
    sidecar_cmd: str | None,
    k: int,
    pca_dim: int,
    n_reps: int,
    seed: int,
    slice_mode: str,
    cache: Path | None,
) -> None:
    t0 = time.perf_counter()
    _require(in_path, stance_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _stage_manifest(out_dir, "cluster",
                          {"in": in_path, "stance": stance_path, "embedder": embedder,
                           "k": k, "pca_dim": pca_dim, "reps": n_reps, "seed": seed,
                           "slice": slice_mode})
    man.record_input(in_path)
    man.record_input(stance_path)
    man.record_seed("kmeans", seed)
    objs = _read_objs(in_path)
    recs = _records_of(objs, in_path)
    stance_map = _read_stance_csv(stance_path)
    texts = [o["text"] for o in objs]

    if cache is not None and cache.exists():
        X = read_embedding_cache(cache)
        if X.shape[0] != len(texts):
            raise ContractError(
                f"embedding cache {cache} has {X.shape[0]} rows for {len(texts)} texts"
            )
    else:
        if embedder == "sidecar":
            if not sidecar_cmd:
                raise ContractError("--sidecar-cmd is required with --embedder sidecar")
            from .sidecar import SidecarClient

            with SidecarClient(shlex.split(sidecar_cmd)) as client:
                X = embed(texts, provider="sidecar", client=client)
        else:
            X = embed(texts, provider="baseline")
        if cache is not None:
            write_embedding_cache(cache, X)

    # group rows into slices, keeping input order inside each slice
    slices: dict[tuple, list[int]] = {}
    meta: list[tuple[str, str, int]] = []
    for i, (obj, rec) in enumerate(zip(objs, recs)):
        drug = obj["drug"]
        if obj["id"] not in stance_map:
            raise ContractError(f"tweet {obj['id']} missing from {stance_path}")
        stance = stance_map[obj["id"]].value if slice_mode == "drug-stance-wave" else "all"
        wave = int(wave_of(rec.created_date))
        meta.append((drug, stance, wave))
        slices.setdefault((drug, stance, wave), []).append(i)

    drug_order = {d.value: j for j, d in enumerate(DrugId)}
    stance_order = {"all": 0} | {s.value: j for j, s in enumerate(CLASS_ORDER)}
    ordered = sorted(slices, key=lambda s: (drug_order[s[0]], stance_order[s[1]], s[2]))

    assigned: dict[int, tuple[int, float]] = {}
    rep_rows: list[str] = []
    clamped = False
    for key in ordered:
        idx = slices[key]
        n = len(idx)
        if n == 1:
            assigned[idx[0]] = (0, 0.0)
            rep_rows.append(f"{key[0]},{key[1]},{key[2]},0,1,{objs[idx[0]]['id']},0.0")
            continue
        sub = X[idx]
        r = min(pca_dim, n - 1, sub.shape[1])
        kk = min(k, n)
        if r < pca_dim or kk < k:
            clamped = True
        _, Y = pca_fit_transform(sub, r)
        model = kmeans(Y, k=kk, seed=seed)
        d = Y - model.centroids[model.assignments]
        dist = ((d * d).sum(axis=1)) ** 0.5
        for j, row_i in enumerate(idx):
            assigned[row_i] = (int(model.assignments[j]), float(dist[j]))
        for c in range(kk):
            for rank, member in enumerate(representatives(Y, model, c, n_reps), start=1):
                rep_rows.append(
                    f"{key[0]},{key[1]},{key[2]},{c},{rank},"
                    f"{objs[idx[member]]['id']},{float(dist[member])!r}"
                )
    if clamped:
        log.warning("cluster: k or pca dim clamped for small slices")

    clusters_path = out_dir / "clusters.csv"
    _write_csv(
        clusters_path, "tweet_id,drug,stance,wave,cluster,dist",
        (f"{objs[i]['id']},{meta[i][0]},{meta[i][1]},{meta[i][2]},"
         f"{assigned[i][0]},{assigned[i][1]!r}"
         for i in range(len(objs))),
    )
    reps_path = out_dir / "representatives.csv"
    _write_csv(reps_path, "drug,stance,wave,cluster,rank,tweet_id,dist", rep_rows)
    man.record_output("cluster", clusters_path)
    man.record_output("cluster", reps_path)
    man.record_timing("cluster", time.perf_counter() - t0)
    man.save()
    log.info("cluster: %d tweets in %d slices", len(objs), len(slices))


def stage_demo(
    in_path: Path,
    roster_path: Path,
    m3_path: Path | None,
    hc_path: Path | None,
    out_dir: Path,
) -> None:
    t0 = time.perf_counter()
    _require(in_path, roster_path, m3_path, hc_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _stage_manifest(out_dir, "demo",
                          {"in": in_path, "roster": roster_path, "m3": m3_path or "",
                           "healthcare_lexicon": hc_path or "bundled"})
    for p in (in_path, roster_path, m3_path):
        if p:
            man.record_input(p)
    objs = _read_objs(in_path)
    recs = _records_of(objs, in_path)
    roster = load_roster(roster_path)
    m3 = load_m3_predictions(m3_path) if m3_path else None
    hc = load_healthcare_lexicon(hc_path)
    profiles = build_profiles((r.author for r in recs), roster, hc, m3)

    profiles_path = out_dir / "profiles.csv"
    _write_csv(
        profiles_path, "user_id,partisanship,healthcare,age_bucket,gender,is_org",
        (f"{uid},{p.partisanship.value},{str(p.healthcare).lower()},"
         f"{p.age_bucket},{p.gender},{str(p.is_org).lower()}"
         for uid, p in sorted(profiles.items())),
    )
    man.record_output("demo", profiles_path)
    man.record_timing("demo", time.perf_counter() - t0)
    man.save()
    log.info("demo: %d users profiled", len(profiles))


def _read_profiles_csv(path: Path) -> dict[str, dict]:
    if not path.exists():
        raise LoadError(f"file not found: {path}")
    out: dict[str, dict] = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        need = {"user_id", "partisanship", "healthcare", "is_org"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise LoadError(f"{path}: expected profile columns {sorted(need)}")
        for row in reader:
            out[row["user_id"]] = {
                "partisanship": row["partisanship"],
                "healthcare": row["healthcare"] == "true",
                "is_org": row["is_org"] == "true",
            }
    return out


def stage_stats(
    in_path: Path,
    stance_path: Path,
    profiles_path: Path,
    out_dir: Path,
    dead_zone: float,
) -> None:
    t0 = time.perf_counter()
    _require(in_path, stance_path, profiles_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _stage_manifest(out_dir, "stats",
                          {"in": in_path, "stance": stance_path,
                           "profiles": profiles_path, "dead_zone": dead_zone})
    for p in (in_path, stance_path, profiles_path):
        man.record_input(p)
    objs = _read_objs(in_path)
    recs = _records_of(objs, in_path)
    stance_map = _read_stance_csv(stance_path)
    profiles = _read_profiles_csv(profiles_path)

    # organizational accounts are excluded from every grouping analysis
    pool: list[tuple[str, str, int, StanceLabel, str, bool]] = []
    for obj, rec in zip(objs, recs):
        tid = obj["id"]
        uid = rec.author.user_id
        if tid not in stance_map:
            raise ContractError(f"tweet {tid} missing from {stance_path}")
        if uid not in profiles:
            raise ContractError(f"user {uid} missing from {profiles_path}")
        prof = profiles[uid]
        if prof["is_org"]:
            continue
        pool.append((obj["drug"], obj["state"], int(wave_of(rec.created_date)),
                     stance_map[tid], prof["partisanship"], prof["healthcare"]))
    if not pool:
        raise ContractError("no non-organizational tweets to analyze")

    groupings = (
        ("partisanship", ("Left", "Neutral", "Right"), lambda e: e[4]),
        ("healthcare", ("healthcare", "other"), lambda e: "healthcare" if e[5] else "other"),
    )
    chisq_rows: list[str] = []
    for name, row_labels, group_of in groupings:
        for drug in [*(d.value for d in DrugId), "all"]:
            sel = pool if drug == "all" else [e for e in pool if e[0] == drug]
            if not sel:
                continue
            stances = [e[3] for e in sel]
            groups = [group_of(e) for e in sel]
            try:
                table = contingency(stances, groups, row_labels)
                res = pearson_chi_square(table)
            except ContractError as e:
                if drug == "all":
                    raise
                log.warning("stats: skipping %s x %s: %s", drug, name, e)
                continue
            chisq_rows.append(
                f"{drug},{name},{res.statistic!r},{res.df},{format_p(res.p_value)},"
                f"{res.min_expected!r},{str(res.low_expected_warning).lower()}"
            )

    chisq_path = out_dir / "chisq.csv"
    _write_csv(chisq_path, "drug,grouping,statistic,df,p,min_expected,low_expected",
               chisq_rows)

    summary = state_stance_summary(
        ((e[1], Wave(e[2]), e[3]) for e in pool), dead_zone
    )
    state_path = out_dir / "state_stance.csv"
    _write_csv(
        state_path, "state,wave,n,mean,stance_class",
        (f"{s.state},{int(s.wave)},{s.n},{s.mean!r},{s.stance_class.value}"
         for s in summary),
    )
    man.record_output("stats", chisq_path)
    man.record_output("stats", state_path)
    man.record_timing("stats", time.perf_counter() - t0)
    man.save()
    log.info("stats: %d chi-square rows, %d state-wave cells",
             len(chisq_rows), len(summary))


def stage_ner(
    in_path: Path,
    out_dir: Path,
    tagger: str,
    sidecar_cmd: str | None,
    top: int,
) -> None:
    t0 = time.perf_counter()
    _require(in_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _stage_manifest(out_dir, "ner", {"in": in_path, "tagger": tagger, "top": top})
    man.record_input(in_path)
    objs = _read_objs(in_path)
    recs = _records_of(objs, in_path)
    texts = [o["text"] for o in objs]

    if tagger == "sidecar":
        if not sidecar_cmd:
            raise ContractError("--sidecar-cmd is required with --tagger sidecar")
        from .sidecar import SidecarClient

        with SidecarClient(shlex.split(sidecar_cmd)) as client:
            raw = client.ner(texts)
        mentions = [
            [EntityMention(surface=e["surface"], entity_class=e["class"]) for e in ents]
            for ents in raw
        ]
    else:
        mentions = [heuristic_entities(t) for t in texts]

    tagged = []
    for obj, rec, ments in zip(objs, recs, mentions):
        wave = wave_of(rec.created_date)
        drug = DrugId(obj["drug"])
        tagged.extend((drug, wave, m) for m in ments)
    freqs = entity_frequencies(tagged, top)

    rows = []
    for drug in DrugId:
        for wave in Wave:
            for cls in ENTITY_CLASSES:
                for term, count in freqs.get((drug, wave, cls), ()):  # ranked
                    rows.append(f"{drug.value},{int(wave)},{cls},{term},{count}")
    entities_path = out_dir / "entities.csv"
    _write_csv(entities_path, "drug,wave,class,term,count", rows)
    man.record_output("ner", entities_path)
    man.record_timing("ner", time.perf_counter() - t0)
    man.save()
    log.info("ner: %d ranked terms", len(rows))


def stage_report(stance_path: Path, state_stance_path: Path, out_dir: Path) -> None:
    t0 = time.perf_counter()
    _require(stance_path, state_stance_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _stage_manifest(out_dir, "report",
                          {"stance": stance_path, "state_stance": state_stance_path})
    man.record_input(stance_path)
    man.record_input(state_stance_path)

    counts: dict[str, dict[StanceLabel, int]] = {}
    with open(stance_path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            per = counts.setdefault(row["drug"], {s: 0 for s in CLASS_ORDER})
            per[StanceLabel(row["stance"])] += 1
    bars = [
        (d.value,
         float(counts[d.value][StanceLabel.Positive]),
         float(counts[d.value][StanceLabel.Neutral]),
         float(counts[d.value][StanceLabel.Negative]))
        for d in DrugId if d.value in counts
    ]
    shares_path = out_dir / "stance_shares.svg"
    if bars:
        atomic_write_text(shares_path, stance_share_chart(bars))
        man.record_output("report", shares_path)
    else:
        log.warning("report: no stance rows, skipping %s", shares_path)

    summaries = []
    with open(state_stance_path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            summaries.append(StateWaveStance(
                state=row["state"], wave=Wave(int(row["wave"])), n=int(row["n"]),
                mean=float(row["mean"]), stance_class=StanceLabel(row["stance_class"]),
            ))
    grid_path = out_dir / "state_grid.svg"
    if summaries:
        atomic_write_text(grid_path, state_grid_chart(summaries))
        man.record_output("report", grid_path)
    else:
        log.warning("report: no state summary rows, skipping %s", grid_path)
    man.record_timing("report", time.perf_counter() - t0)
    man.save()


def stage_sample_eval(
    dataset: Path, out_path: Path, size: int, seed: int, masking: bool
) -> None:
    _, held_out = load_stance_dataset(dataset, split_seed=seed)
    pool = held_out.items
    size = min(size, len(pool))
    idx = sample_indices(len(pool), size, seed)
    texts = [pool[i][0] for i in idx]
    gold = [pool[i][1] for i in idx]
    handle = ClassifierHandle(kind="rule-baseline", masking=masking)
    pred = classify(texts, handle)
    m = evaluate(pred, gold)

    rows = [
        f"{label.value},{m.per_class[label].precision!r},"
        f"{m.per_class[label].recall!r},{m.per_class[label].f1!r}"
        for label in CLASS_ORDER
    ]
    rows.append(f"macro,{m.macro_precision!r},{m.macro_recall!r},{m.macro_f1!r}")
    rows.append(f"accuracy,{m.accuracy!r},,")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out_path, "class,precision,recall,f1", rows)
    print(f"sampled {size} of {len(pool)} held-out rows: "
          f"accuracy {m.accuracy:.3f}, macro F1 {m.macro_f1:.3f}")


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="flat key=value config file; flags take precedence")
    sp.add_argument("-v", "--verbose", action="store_true", help="log stage progress")


def _path_or_none(v: str | None) -> Path | None:
    return Path(v) if v else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulse",
        description="Drug-opinion pipeline: ingest, match, geolocate, classify, analyze.",
    )
    parser.add_argument("--version", action="version", version=f"pulse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="filter raw JSONL into the working corpus")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="JSONL")
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("match", help="tag tweets with the single drug they mention")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--lexicon", help="override the bundled drug lexicon CSV")
    p.add_argument("--threads", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("geo", help="resolve tweets to US states")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--gazetteer", help="override the bundled gazetteer CSV")
    p.add_argument("--threads", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_geo)

    p = sub.add_parser("stance", help="label tweet stance toward its drug")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--classifier", choices=("rule", "sidecar"))
    p.add_argument("--masking", action="store_true", default=None,
                   help="replace drug names with [mask] before classification")
    p.add_argument("--cues", help="override the bundled cue-word CSV")
    p.add_argument("--sidecar-cmd", help="command line that starts the model server")
    p.add_argument("--threads", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_stance)

    p = sub.add_parser("trend", help="weekly tweet counts joined with case counts")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--cases", required=True, help="wide cumulative case-count CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--region", help="case-table region to aggregate (default US)")
    _add_common(p)
    p.set_defaults(func=cmd_trend)

    p = sub.add_parser("cluster", help="cluster tweets and pick representatives")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--stance", dest="stance_path", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--embedder", choices=("baseline", "sidecar"))
    p.add_argument("--sidecar-cmd")
    p.add_argument("--k", type=int)
    p.add_argument("--pca-dim", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--slice", dest="slice_mode", choices=("drug-stance-wave", "drug-wave"))
    p.add_argument("--cache", help="embedding cache file (read if present, else written)")
    _add_common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("demo", help="infer per-user demographic attributes")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--roster", required=True, help="account_id,party politician roster")
    p.add_argument("--m3", help="user_id,...,is_org predictions CSV")
    p.add_argument("--healthcare-lexicon")
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("stats", help="chi-square tests and state stance summary")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--stance", dest="stance_path", required=True)
    p.add_argument("--profiles", dest="profiles_path", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dead-zone", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("ner", help="rank named entities per drug and wave")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--tagger", choices=("heuristic", "sidecar"))
    p.add_argument("--sidecar-cmd")
    p.add_argument("--top", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_ner)

    p = sub.add_parser("report", help="render stance-share and state-grid charts")
    p.add_argument("--stance", dest="stance_path", required=True)
    p.add_argument("--state-stance", dest="state_stance_path", required=True)
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="write a seeded synthetic corpus with planted truth")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--tweets", type=int, help="number of clean single-drug tweets")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sample-eval", help="spot-check the rule baseline on a labeled CSV")
    p.add_argument("--dataset", required=True, help="text,label CSV (codes 0/1/2)")
    p.add_argument("--out", dest="out_path", required=True)
    p.add_argument("--size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--masking", action="store_true", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_sample_eval)

    p = sub.add_parser("run", help="run every stage in order from one config file")
    p.add_argument("--config", required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_run)

    return parser


# ---------------------------------------------------------------------------
# command adapters

def cmd_ingest(args: argparse.Namespace) -> int:
    stage_ingest([Path(p) for p in args.inputs], Path(args.out_dir))
    return 0


def cmd_match(args: argparse.Namespace) -> int:
    stage_match(Path(args.in_path), Path(args.out_dir),
                _path_or_none(_opt(args, "lexicon", None, str)), _threads(args))
    return 0


def cmd_geo(args: argparse.Namespace) -> int:
    stage_geo(Path(args.in_path), Path(args.out_dir),
              _path_or_none(_opt(args, "gazetteer", None, str)), _threads(args))
    return 0


def cmd_stance(args: argparse.Namespace) -> int:
    stage_stance(
        Path(args.in_path), Path(args.out_dir),
        _opt(args, "classifier", "rule", str),
        _opt(args, "masking", False, _parse_bool),
        _path_or_none(_opt(args, "cues", None, str)),
        _opt(args, "sidecar_cmd", None, str),
        _threads(args),
    )
    return 0


def cmd_trend(args: argparse.Namespace) -> int:
    stage_trend(Path(args.in_path), Path(args.cases), Path(args.out_dir),
                _opt(args, "region", "US", str))
    return 0


def cmd_cluster(args: argparse.Namespace) -> int:
    stage_cluster(
        Path(args.in_path), Path(args.stance_path), Path(args.out_dir),
        _opt(args, "embedder", "baseline", str),
        _opt(args, "sidecar_cmd", None, str),
        _opt(args, "k", 15, int),
        _opt(args, "pca_dim", 30, int),
        _opt(args, "reps", 30, int),
        _opt(args, "seed", 0, int),
        _opt(args, "slice_mode", "drug-stance-wave", str),
        _path_or_none(_opt(args, "cache", None, str)),
    )
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    stage_demo(
        Path(args.in_path), Path(args.roster),
        _path_or_none(_opt(args, "m3", None, str)),
        _path_or_none(_opt(args, "healthcare_lexicon", None, str)),
        Path(args.out_dir),
    )
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    stage_stats(
        Path(args.in_path), Path(args.stance_path), Path(args.profiles_path),
        Path(args.out_dir), _opt(args, "dead_zone", DEFAULT_DEAD_ZONE, float),
    )
    return 0


def cmd_ner(args: argparse.Namespace) -> int:
    stage_ner(
        Path(args.in_path), Path(args.out_dir),
        _opt(args, "tagger", "heuristic", str),
        _opt(args, "sidecar_cmd", None, str),
        _opt(args, "top", 10, int),
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    stage_report(Path(args.stance_path), Path(args.state_stance_path), Path(args.out_dir))
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = _opt(args, "seed", 7, int)
    kwargs = {}
    tweets = _opt(args, "tweets", None, int)
    if tweets is not None:
        kwargs["n_clean"] = tweets
    man = _stage_manifest(out_dir, "synth", {"seed": seed, "tweets": tweets or "default"})
    man.record_seed("synth", seed)
    t0 = time.perf_counter()
    truth = generate(out_dir, seed=seed, **kwargs)
    for name in ("corpus.jsonl", "cases.csv", "roster.csv", "m3.csv", "truth.json"):
        man.record_output("synth", out_dir / name)
    man.record_timing("synth", time.perf_counter() - t0)
    man.save()
    print(f"wrote {truth['n_lines']} corpus lines to {out_dir}")
    return 0


def cmd_sample_eval(args: argparse.Namespace) -> int:
    stage_sample_eval(
        Path(args.dataset), Path(args.out_path),
        _opt(args, "size", 500, int), _opt(args, "seed", 0, int),
        _opt(args, "masking", False, _parse_bool),
    )
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = getattr(args, "_cfg", {})
    for key in ("corpus", "cases", "roster", "out_dir"):
        if key not in cfg:
            raise ContractError(f"run config is missing required key {key!r}")
    out = Path(cfg["out_dir"])
    threads = _threads(args)
    stage_ingest([Path(p) for p in cfg["corpus"].split(",")], out)
    stage_match(out / "filtered.jsonl", out,
                _path_or_none(cfg.get("lexicon")), threads)
    stage_geo(out / "matched.jsonl", out, _path_or_none(cfg.get("gazetteer")), threads)
    stage_stance(out / "geotagged.jsonl", out,
                 cfg.get("classifier", "rule"),
                 _parse_bool(cfg.get("masking", "false")),
                 _path_or_none(cfg.get("cues")), cfg.get("sidecar_cmd"), threads)
    stage_trend(out / "geotagged.jsonl", Path(cfg["cases"]), out, cfg.get("region", "US"))
    stage_cluster(out / "geotagged.jsonl", out / "stance.csv", out,
                  cfg.get("embedder", "baseline"), cfg.get("sidecar_cmd"),
                  int(cfg.get("k", "15")), int(cfg.get("pca_dim", "30")),
                  int(cfg.get("reps", "30")), int(cfg.get("seed", "0")),
                  cfg.get("slice", "drug-stance-wave"), _path_or_none(cfg.get("cache")))
    stage_demo(out / "geotagged.jsonl", Path(cfg["roster"]),
               _path_or_none(cfg.get("m3")), _path_or_none(cfg.get("healthcare_lexicon")),
               out)
    stage_stats(out / "geotagged.jsonl", out / "stance.csv", out / "profiles.csv", out,
                float(cfg.get("dead_zone", str(DEFAULT_DEAD_ZONE))))
    stage_ner(out / "geotagged.jsonl", out, cfg.get("tagger", "heuristic"),
              cfg.get("sidecar_cmd"), int(cfg.get("top", "10")))
    stage_report(out / "stance.csv", out / "state_stance.csv", out)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = getattr(args, "config", None)
        args._cfg = load_config(config) if config else {}
        return args.func(args)
    except TransportError as e:
        print(f"pulse: transport error: {e}", file=sys.stderr)
        return 3
    except ContractError as e:
        print(f"pulse: {e}", file=sys.stderr)
        return 2
