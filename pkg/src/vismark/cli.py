"""Command-line interface: generate, detect, attack, rank, experiment,
verify-theory, plus a probe subcommand for cross-implementation parity.

All randomized subcommands require an explicit --seed; outputs are JSON
on stdout (and optionally to --out) with the tool version, config
fingerprint, and a key-redacted echo of the resolved configuration.
Exit codes: 0 success, 1 validation error, 2 I/O or format error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .attacks import ATTACK_KINDS, AttackSpec, attack_edit, ingest_external_text
from .detection import DEFAULT_THRESHOLD_Z, detect_full_replay, detect_model_free
from .embeddings import (
    WatermarkConfig,
    filter_linguistic,
    load_decode_table,
    read_embedding_matrix,
    VisionEmbeddings,
)
from .errors import FormatError, ValidationError, VismarkError
from .harness import (
    SceneSpec,
    THEORY_CHECKS,
    ToyLMSpec,
    build_world,
    run_experiment,
    verify_theory,
)
from .partition import SENTINEL_PREV_TOKEN, build_partition, step_entropy
from .saliency import fuse_and_rank
from .watermark import (
    adjust_distribution,
    config_fingerprint,
    generate,
    generate_unwatermarked,
)


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def _load_run_config(path):
    obj = _load_json(path)
    if not isinstance(obj, dict) or "watermark" not in obj:
        raise FormatError(f"{path}: config must be a JSON object with a 'watermark' section")
    wm = dict(obj["watermark"])
    key_hex = wm.pop("key", None)
    if key_hex is None:
        raise ValidationError(f"{path}: watermark.key (32 hex chars) is required")
    cfg = WatermarkConfig.from_hex_key(key_hex, **wm)
    lm_section = dict(obj.get("lm", {}))
    if "mix" in lm_section:
        lm_section["mix"] = tuple(lm_section["mix"])
    lm_spec = ToyLMSpec(**lm_section)
    scene_spec = SceneSpec(**obj.get("scene", {}))
    return cfg, lm_spec, scene_spec


def _config_echo(cfg: WatermarkConfig, lm_spec: ToyLMSpec, scene_spec: SceneSpec, **invocation):
    return {
        "watermark": {
            "alpha": cfg.alpha,
            "gamma": cfg.gamma,
            "delta": cfg.delta,
            "epsilon": cfg.epsilon,
            "key_fingerprint": cfg.key_fingerprint(),
        },
        "lm": vars(lm_spec) | {"mix": list(lm_spec.mix)},
        "scene": vars(scene_spec),
        "invocation": invocation,
    }


def _emit(obj: dict, out_path=None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _read_tokens(path) -> list[int]:
    obj = _load_json(path)
    if isinstance(obj, list):
        tokens = obj
    elif isinstance(obj, dict) and "tokens" in obj:
        tokens = obj["tokens"]
    else:
        raise FormatError(f"{path}: expected a token list or an object with a 'tokens' field")
    if not isinstance(tokens, list) or not all(
        isinstance(t, int) and not isinstance(t, bool) for t in tokens
    ):
        raise FormatError(f"{path}: tokens must be integers")
    return [int(t) for t in tokens]


def _cmd_generate(args) -> int:
    cfg, lm_spec, scene_spec = _load_run_config(args.config)
    world = build_world(lm_spec, scene_spec)
    rng = np.random.default_rng(args.seed)
    if args.plain:
        rec = generate_unwatermarked(
            world.lm, world.scene, world.vocab, args.len, rng, cfg.epsilon
        )
    else:
        rec = generate(world.lm, world.scene, world.vocab, cfg, args.len, rng)
    out = rec.to_json_dict()
    out["tool_version"] = __version__
    out["config_fingerprint"] = config_fingerprint(None if args.plain else cfg, world.vocab)
    out["config"] = _config_echo(
        cfg, lm_spec, scene_spec, subcommand="generate", seed=args.seed,
        len=args.len, plain=bool(args.plain),
    )
    _emit(out, args.out)
    return 0


def _parse_key_flag(key_hex: str) -> bytes:
    if len(key_hex) != 32:
        raise ValidationError("--key must be a 32-hex-char string")
    try:
        return bytes.fromhex(key_hex)
    except ValueError as exc:
        raise ValidationError(f"bad --key hex: {exc}") from exc


def _cmd_detect(args) -> int:
    cfg, lm_spec, scene_spec = _load_run_config(args.config)
    if args.key is not None or args.gamma is not None:
        cfg = WatermarkConfig(
            key=_parse_key_flag(args.key) if args.key is not None else cfg.key,
            alpha=cfg.alpha,
            gamma=args.gamma if args.gamma is not None else cfg.gamma,
            delta=cfg.delta,
            epsilon=cfg.epsilon,
        )
    world = build_world(lm_spec, scene_spec)
    tokens = _read_tokens(args.infile)
    if args.mode == "model-free":
        report = detect_model_free(
            tokens, cfg.key, cfg.gamma, world.vocab, threshold_z=args.threshold_z
        )
    else:
        report = detect_full_replay(
            tokens, world.lm, world.scene, world.vocab, cfg, threshold_z=args.threshold_z
        )
    out = report.to_json_dict()
    out["tool_version"] = __version__
    out["config_fingerprint"] = config_fingerprint(cfg, world.vocab)
    out["config"] = _config_echo(
        cfg, lm_spec, scene_spec, subcommand="detect", mode=args.mode,
        threshold_z=args.threshold_z, infile=str(args.infile),
    )
    _emit(out, args.out)
    return 0


def _cmd_attack(args) -> int:
    cfg, lm_spec, scene_spec = _load_run_config(args.config)
    world = build_world(lm_spec, scene_spec)
    if args.ingest:
        tokens = ingest_external_text(args.infile, world.vocab)
        edited = tokens
        spec = None
    else:
        if args.kind is None:
            raise ValidationError("--kind is required unless --ingest is given")
        tokens = _read_tokens(args.infile)
        spec = AttackSpec(kind=args.kind, rate=args.rate, seed=args.seed)
        rng = np.random.default_rng([args.seed])
        edited = attack_edit(tokens, spec, world.vocab, rng)
    out = {
        "tokens": edited,
        "tool_version": __version__,
        "config_fingerprint": config_fingerprint(cfg, world.vocab),
        "config": _config_echo(
            cfg, lm_spec, scene_spec, subcommand="attack",
            kind=(spec.kind if spec else "ingest"),
            rate=(spec.rate if spec else None), seed=args.seed, infile=str(args.infile),
        ),
    }
    _emit(out, args.out)
    return 0


def _build_scene_from_files(path) -> VisionEmbeddings:
    m = read_embedding_matrix(path)
    return VisionEmbeddings(patches=m[1:], cls=m[0])


def _cmd_rank(args) -> int:
    if args.vocab_emb or args.decode or args.scene_emb:
        if not (args.vocab_emb and args.decode and args.scene_emb):
            raise ValidationError(
                "--vocab-emb, --decode and --scene-emb must be given together"
            )
        emb = read_embedding_matrix(args.vocab_emb)
        vocab = filter_linguistic(load_decode_table(args.decode), emb)
        scene = _build_scene_from_files(args.scene_emb)
        cfg, lm_spec, scene_spec = _load_run_config(args.config)
    else:
        cfg, lm_spec, scene_spec = _load_run_config(args.config)
        world = build_world(lm_spec, scene_spec)
        vocab, scene = world.vocab, world.scene
    ranked = fuse_and_rank(vocab, scene)
    s = ranked.scores
    records = [
        {
            "token_id": int(vocab.linguistic_ids[row]),
            "phi": float(s.phi[row]),
            "lpa_n": float(s.lpa_n[row]),
            "gsc_n": float(s.gsc_n[row]),
            "ccs_n": float(s.ccs_n[row]),
        }
        for row in ranked.order
    ]
    out = {
        "ranking": records,
        "tool_version": __version__,
        "config_fingerprint": config_fingerprint(cfg, vocab),
        "config": _config_echo(cfg, lm_spec, scene_spec, subcommand="rank"),
    }
    _emit(out, args.out)
    return 0


def _parse_attack_list(spec_text: str) -> list[AttackSpec]:
    specs = []
    for chunk in filter(None, (s.strip() for s in spec_text.split(","))):
        parts = chunk.split(":")
        if len(parts) not in (2, 3):
            raise ValidationError(f"bad attack spec {chunk!r}, expected kind:rate[:seed]")
        seed = int(parts[2]) if len(parts) == 3 else 0
        specs.append(AttackSpec(kind=parts[0], rate=float(parts[1]), seed=seed))
    return specs


def _cmd_experiment(args) -> int:
    cfg, lm_spec, scene_spec = _load_run_config(args.config)
    attacks = _parse_attack_list(args.attacks) if args.attacks else []
    report = run_experiment(
        cfg, lm_spec, scene_spec,
        n_pos=args.n_pos, n_neg=args.n_neg, length=args.len,
        attacks=attacks, seed=args.seed, with_replay=not args.no_replay,
    )
    out = report.to_json_dict()
    out["tool_version"] = __version__
    out["config_fingerprint"] = config_fingerprint(cfg, build_world(lm_spec, scene_spec).vocab)
    out["config"]["invocation"] = {
        "subcommand": "experiment", "seed": args.seed, "n_pos": args.n_pos,
        "n_neg": args.n_neg, "len": args.len, "attacks": args.attacks or "",
    }
    if args.csv:
        _write_experiment_csv(report, args.csv)
    _emit(out, args.out)
    return 0


def _write_experiment_csv(report, path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["condition", "auc", "auc_drop", "mean_z"])
        for mode, a in sorted(report.auc.items()):
            pos = report.arms[f"watermarked_{mode}"]
            w.writerow([mode, f"{a:.6f}", "", f"{float(np.mean(pos)):.6f}"])
        for label, outcome in sorted(report.attacks.items()):
            w.writerow(
                [label, f"{outcome.auc:.6f}", f"{outcome.auc_drop:.6f}", f"{outcome.mean_z:.6f}"]
            )


def _cmd_verify_theory(args) -> int:
    cfg, lm_spec, scene_spec = _load_run_config(args.config)
    report = verify_theory(
        args.which, cfg, trials=args.trials, lm_spec=lm_spec,
        scene_spec=scene_spec, seed=args.seed,
    )
    out = report.to_json_dict()
    out["tool_version"] = __version__
    out["config_fingerprint"] = config_fingerprint(cfg, build_world(lm_spec, scene_spec).vocab)
    out["config"] = _config_echo(
        cfg, lm_spec, scene_spec, subcommand="verify-theory",
        which=args.which, trials=args.trials, seed=args.seed,
    )
    _emit(out, args.out)
    return 0


def _cmd_probe(args) -> int:
    if args.probe_what == "green-test":
        from .partition import green_units

        if args.key is None:
            raise ValidationError("probe green-test requires --key")
        key = _parse_key_flag(args.key)
        obj = _load_json(args.infile)
        pairs = obj.get("pairs")
        threshold = obj.get("threshold")
        if (
            not isinstance(pairs, list)
            or threshold is None
            or not all(isinstance(p, list) and len(p) == 2 for p in pairs)
        ):
            raise FormatError(
                f"{args.infile}: expected {{'threshold': t, 'pairs': [[prev, cand], ...]}}"
            )
        prevs = np.asarray([int(p[0]) for p in pairs], dtype=np.uint64)
        cands = np.asarray([int(p[1]) for p in pairs], dtype=np.uint64)
        units = green_units(key, prevs, cands)
        from ._kernels import siphash24_words
        import struct as _struct

        k0 = _struct.unpack("<Q", key[:8])[0]
        k1 = _struct.unpack("<Q", key[8:])[0]
        hashes = siphash24_words(k0, k1, prevs | (cands << np.uint64(32)))
        out = {
            "results": (units < float(threshold)).tolist(),
            "hashes": [str(int(h)) for h in hashes],
            "tool_version": __version__,
        }
        _emit(out, args.out)
        return 0

    # process-logits
    if args.config is None:
        raise ValidationError("probe process-logits requires --config")
    cfg, lm_spec, scene_spec = _load_run_config(args.config)
    if args.vocab_emb or args.decode or args.scene_emb:
        if not (args.vocab_emb and args.decode and args.scene_emb):
            raise ValidationError(
                "--vocab-emb, --decode and --scene-emb must be given together"
            )
        emb = read_embedding_matrix(args.vocab_emb)
        vocab = filter_linguistic(load_decode_table(args.decode), emb)
        scene = _build_scene_from_files(args.scene_emb)
    else:
        world = build_world(lm_spec, scene_spec)
        vocab, scene = world.vocab, world.scene
    ranked = fuse_and_rank(vocab, scene)
    obj = _load_json(args.infile)
    cases = obj.get("cases")
    if not isinstance(cases, list):
        raise FormatError(f"{args.infile}: expected {{'cases': [{{'prev_token': .., 'logits': [..]}}]}}")
    dists = []
    for case in cases:
        z = np.asarray(case["logits"], dtype=np.float64)
        prev = int(case.get("prev_token", SENTINEL_PREV_TOKEN))
        info = step_entropy(z, cfg.epsilon)
        part = build_partition(ranked, info, cfg, prev)
        dists.append(adjust_distribution(z, part, cfg.delta).tolist())
    out = {
        "distributions": dists,
        "tool_version": __version__,
        "config_fingerprint": config_fingerprint(cfg, vocab),
    }
    _emit(out, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="vismark",
        description="Vision-saliency-guided generation watermarking: embed, detect, attack, verify.",
    )
    p.add_argument("--version", action="version", version=f"vismark {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("generate", help="watermarked (or plain) toy-LM generation")
    g.add_argument("--config", required=True)
    g.add_argument("--len", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--plain", action="store_true", help="sample without watermarking")
    g.add_argument("--out")
    g.set_defaults(func=_cmd_generate)

    d = sub.add_parser("detect", help="test a token sequence for the watermark")
    d.add_argument("--in", dest="infile", required=True)
    d.add_argument("--mode", choices=["model-free", "replay"], default="model-free")
    d.add_argument("--config", required=True)
    d.add_argument("--key", help="32-hex key override")
    d.add_argument("--gamma", type=float, help="green fraction override")
    d.add_argument("--threshold-z", type=float, default=DEFAULT_THRESHOLD_Z)
    d.add_argument("--out")
    d.set_defaults(func=_cmd_detect)

    a = sub.add_parser("attack", help="edit a token sequence or ingest external text")
    a.add_argument("--in", dest="infile", required=True)
    a.add_argument("--out")
    a.add_argument("--kind", choices=list(ATTACK_KINDS))
    a.add_argument("--rate", type=float, default=0.05)
    a.add_argument("--seed", type=int, required=True)
    a.add_argument("--ingest", action="store_true", help="resolve surface text instead of editing")
    a.add_argument("--config", required=True)
    a.set_defaults(func=_cmd_attack)

    r = sub.add_parser("rank", help="dump the saliency-ranked vocabulary")
    r.add_argument("--config", required=True)
    r.add_argument("--vocab-emb", help="EMB1 file with the full token table")
    r.add_argument("--decode", help="JSON decode table {id: surface}")
    r.add_argument("--scene-emb", help="EMB1 file, row 0 = CLS, rows 1.. = patches")
    r.add_argument("--out")
    r.set_defaults(func=_cmd_rank)

    e = sub.add_parser("experiment", help="corpus-level detection/robustness run")
    e.add_argument("--config", required=True)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--n-pos", type=int, default=200)
    e.add_argument("--n-neg", type=int, default=200)
    e.add_argument("--len", type=int, default=200)
    e.add_argument("--attacks", help="comma list of kind:rate[:seed]")
    e.add_argument("--no-replay", action="store_true")
    e.add_argument("--csv")
    e.add_argument("--out")
    e.set_defaults(func=_cmd_experiment)

    v = sub.add_parser("verify-theory", help="numerically check a theoretical guarantee")
    v.add_argument("--which", choices=list(THEORY_CHECKS), required=True)
    v.add_argument("--config", required=True)
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--seed", type=int, required=True)
    v.add_argument("--out")
    v.set_defaults(func=_cmd_verify_theory)

    pr = sub.add_parser("probe", help="cross-implementation parity probes")
    pr.add_argument("probe_what", choices=["green-test", "process-logits"])
    pr.add_argument("--in", dest="infile", required=True)
    pr.add_argument("--key", help="32-hex key (green-test)")
    pr.add_argument("--config", help="run config (process-logits)")
    pr.add_argument("--vocab-emb", help="EMB1 token table instead of the config world")
    pr.add_argument("--decode", help="JSON decode table, used with --vocab-emb")
    pr.add_argument("--scene-emb", help="EMB1 scene (row 0 = CLS), used with --vocab-emb")
    pr.add_argument("--out")
    pr.set_defaults(func=_cmd_probe)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VismarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
