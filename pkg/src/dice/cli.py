"""Pipeline CLI: align, fit, edit, dlpips, demo-synthetic.

Exit codes partition error classes:
    0 success
    1 demo assertion failure
    2 validation (shapes, ranges, config)
    3 I/O or file format
    4 numerical failure

DICE_THREADS caps internal parallelism; it must take effect before the BLAS
runtime loads, which is why the cap is applied at module import time, ahead
of the numpy-dependent imports below.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def _apply_thread_cap() -> None:
    cap = os.environ.get("DICE_THREADS", "")
    if cap.isdigit() and int(cap) >= 1:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                    "NUMEXPR_NUM_THREADS", "NUMBA_NUM_THREADS"):
            os.environ.setdefault(var, cap)


_apply_thread_cap()

import time  # noqa: E402

import numpy as np  # noqa: E402

from . import aec as aec_mod  # noqa: E402
from . import _kernels  # noqa: E402
from .align import AlignedTriplet, align_to_anchor, align_triplet  # noqa: E402
from .config import PipelineConfig, load_config  # noqa: E402
from .edit import (  # noqa: E402
    AttentionTriple,
    EraseParams,
    apply_dice_edit,
    edited_attention,
    project_onto,
    suppress_style,
)
from .errors import FormatError, NumericalError, ValidationError  # noqa: E402
from .evaluation import (  # noqa: E402
    compute_dlpips,
    holistic_index,
    load_manifests,
    report_table,
    report_to_dict,
)
from .subspace import (  # noqa: E402
    fit_both_subspaces,
    load_subspace,
    save_subspace,
)
from .synthlab import PlantedSpec, generate_triplet, principal_angles  # noqa: E402
from .tensor_io import (  # noqa: E402
    FeatureMatrix,
    _atomic_write_bytes,
    read_tensor,
    reshape_to_patches,
    write_tensor,
)

ALIGNED_FILES = ("anchor.dtf", "aligned_positive.dtf", "aligned_negative.dtf")
INDICES_FILE = "alignment_indices.json"


class DemoAssertionError(Exception):
    """Named self-test failure inside demo-synthetic."""


def _write_json(path, obj) -> None:
    blob = json.dumps(obj, indent=2, sort_keys=True).encode() + b"\n"
    _atomic_write_bytes(path, blob)


def _read_feature_matrix(path) -> FeatureMatrix:
    t = read_tensor(path)
    if isinstance(t, FeatureMatrix):
        return t
    # 3-axis dumps are feature maps; flatten to patch rows
    return reshape_to_patches(t)


# ----------------------------------------------------------------- align

def cmd_align(args) -> int:
    anc = _read_feature_matrix(args.anchor)
    pos = _read_feature_matrix(args.positive)
    neg = _read_feature_matrix(args.negative)
    for path, fm in ((args.positive, pos), (args.negative, neg)):
        if (fm.n_tokens, fm.dim) != (anc.n_tokens, anc.dim):
            raise ValidationError(
                f"{path}: shape {fm.n_tokens}x{fm.dim} does not match "
                f"anchor {anc.n_tokens}x{anc.dim}"
            )
    t = align_triplet(anc, pos, neg)
    os.makedirs(args.out, exist_ok=True)
    write_tensor(t.anchor, os.path.join(args.out, "anchor.dtf"))
    write_tensor(t.positive, os.path.join(args.out, "aligned_positive.dtf"))
    write_tensor(t.negative, os.path.join(args.out, "aligned_negative.dtf"))
    _write_json(os.path.join(args.out, INDICES_FILE), {
        "positive": [int(i) for i in t.positive_indices],
        "negative": [int(i) for i in t.negative_indices],
    })
    if args.verbose:
        print(f"aligned {anc.n_tokens} tokens (dim {anc.dim}) -> {args.out}")
    return 0


def _load_aligned_dir(path) -> AlignedTriplet:
    mats = []
    for name in ALIGNED_FILES:
        full = os.path.join(path, name)
        fm = read_tensor(full)
        if not isinstance(fm, FeatureMatrix):
            raise FormatError(f"{full}: expected a 2-axis tensor")
        mats.append(fm)
    idx_path = os.path.join(path, INDICES_FILE)
    try:
        with open(idx_path, "rb") as fh:
            idx = json.load(fh)
    except OSError as e:
        raise FormatError(f"{idx_path}: missing alignment indices: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{idx_path}: bad JSON: {e}") from e
    return AlignedTriplet(
        anchor=mats[0], positive=mats[1], negative=mats[2],
        positive_indices=np.asarray(idx["positive"], dtype=np.int64),
        negative_indices=np.asarray(idx["negative"], dtype=np.int64),
    )


# ------------------------------------------------------------------- fit

def _config_from_args(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return PipelineConfig()


def cmd_fit(args) -> int:
    cfg = _config_from_args(args)
    t = _load_aligned_dir(args.aligned_dir)
    cfg.check_rank_against_dim(t.anchor.dim)
    params = cfg.to_erase_params()

    t0 = time.perf_counter()
    style, content = fit_both_subspaces(t, params)
    elapsed = time.perf_counter() - t0

    os.makedirs(args.out, exist_ok=True)
    save_subspace(style, os.path.join(args.out, "style_subspace.dtf"))
    save_subspace(content, os.path.join(args.out, "content_subspace.dtf"))

    for sub in (style, content):
        spectrum = ", ".join(f"{v:.6g}" for v in sub.eigenvalues)
        print(f"{sub.kind} eigenvalues: [{spectrum}]")
    print(f"fit_seconds={elapsed:.3f}")
    if args.verbose:
        print(f"epsilon={style.epsilon:.6g} lambda={style.lam} "
              f"N={t.anchor.n_tokens} D={t.anchor.dim}")
    return 0


# ------------------------------------------------------------------ edit

_QKV_KEYS = {"layer", "timestep", "head", "q", "k", "v", "d_model"}


def _load_qkv_manifest(path):
    try:
        with open(path, "rb") as fh:
            obj = json.load(fh)
    except OSError as e:
        raise FormatError(f"{path}: cannot read manifest: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: bad JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: manifest must be a JSON object")
    unknown = set(obj) - _QKV_KEYS
    if unknown:
        raise ValidationError(f"{path}: unknown manifest keys: {sorted(unknown)}")
    missing = {"q", "k", "v"} - set(obj)
    if missing:
        raise ValidationError(f"{path}: manifest missing roles: {sorted(missing)}")
    base = os.path.dirname(os.path.abspath(path))
    mats = {}
    for role in ("q", "k", "v"):
        rel = obj[role]
        full = rel if os.path.isabs(rel) else os.path.join(base, rel)
        fm = read_tensor(full)
        if not isinstance(fm, FeatureMatrix):
            raise FormatError(f"{full}: expected a 2-axis tensor for role {role}")
        mats[role] = fm
    triple = AttentionTriple(
        q=mats["q"], k=mats["k"], v=mats["v"],
        d_model=int(obj.get("d_model", 0)),
    )
    meta = {k: obj[k] for k in ("layer", "timestep", "head") if k in obj}
    return triple, meta


def cmd_edit(args) -> int:
    cfg = _config_from_args(args)
    triple, meta = _load_qkv_manifest(args.qkv_manifest)
    style = load_subspace(os.path.join(args.subspace_dir, "style_subspace.dtf"))
    content = load_subspace(os.path.join(args.subspace_dir, "content_subspace.dtf"))
    for name, sub in (("style", style), ("content", content)):
        if sub.d != triple.q.dim:
            raise ValidationError(
                f"{name} subspace dim {sub.d} vs token dim {triple.q.dim}"
            )
    params = cfg.to_erase_params()
    gamma = aec_mod.compute_gamma(triple, style, params.aec)
    edited = apply_dice_edit(triple, style, content, params)

    os.makedirs(args.out, exist_ok=True)
    outputs = {
        "q": "q_edited.dtf", "k": "k_edited.dtf", "v": "v_edited.dtf",
        "gamma": "gamma.dtf",
    }
    write_tensor(edited.q, os.path.join(args.out, outputs["q"]))
    write_tensor(edited.k, os.path.join(args.out, outputs["k"]))
    write_tensor(edited.v, os.path.join(args.out, outputs["v"]))
    write_tensor(gamma.reshape(-1, 1), os.path.join(args.out, outputs["gamma"]))
    _write_json(os.path.join(args.out, "edit_manifest.json"),
                {**meta, "files": outputs})
    if args.verbose:
        print(f"gamma range [{gamma.min():.4f}, {gamma.max():.4f}] "
              f"over {triple.n_tokens} tokens")
    return 0


# ---------------------------------------------------------------- dlpips

def cmd_dlpips(args) -> int:
    manifests = load_manifests(args.manifest)
    reports = [compute_dlpips(m) for m in manifests]
    table = report_table(reports)
    print(table, end="")
    out_path = args.out or (args.manifest + ".report.json")
    payload = {"reports": [report_to_dict(r) for r in reports]}
    if len(reports) > 1:
        payload["aggregate_h_o"] = holistic_index(
            [r.c_style for r in reports], [r.c_content for r in reports]
        )
    _write_json(out_path, payload)
    return 0


# --------------------------------------------------------- demo-synthetic

def _demo_check(name: str, ok: bool, detail: str) -> None:
    print(f"[{'pass' if ok else 'FAIL'}] {name}: {detail}")
    if not ok:
        raise DemoAssertionError(name)


def cmd_demo_synthetic(args) -> int:
    cfg = _config_from_args(args)
    sigma = args.noise_sigma
    n, d, rank = 256, 32, 4
    # recovery gates calibrated against the brute-force oracle
    angle_gate = 1e-3 if sigma == 0 else 0.15
    params = EraseParams(
        lam=cfg.lam, epsilon_rel=0.05, r_style=rank, r_content=rank,
        gamma_q=cfg.gamma_q, aec=cfg.aec,
    )
    print(f"demo geometry: N={n} D={d} r={rank} sigma={sigma} seed={args.seed}")

    spec = PlantedSpec(n, d, rank, rank, noise_sigma=sigma, seed=args.seed)
    triplet, filled = generate_triplet(spec)

    # align stage: structural invariants of the matcher
    ta = align_triplet(triplet.anchor, triplet.positive, triplet.negative)
    in_range = bool(
        ta.positive_indices.min() >= 0 and ta.positive_indices.max() < n
        and ta.negative_indices.min() >= 0 and ta.negative_indices.max() < n
    )
    _demo_check("align_indices_in_range", in_range, f"N={n}")
    member = bool(
        np.array_equal(ta.positive.data, triplet.positive.data[ta.positive_indices])
        and np.array_equal(ta.negative.data, triplet.negative.data[ta.negative_indices])
    )
    _demo_check("align_membership", member, "aligned rows are source rows")
    _, self_idx = align_to_anchor(triplet.anchor, triplet.anchor)
    ident = bool(np.array_equal(self_idx, np.arange(n)))
    _demo_check("align_self_identity", ident, "anchor matches itself row-wise")

    # fit stage on the constructed pairing (see README on why not ta)
    style, content = fit_both_subspaces(triplet, params)
    ang_s = principal_angles(filled.ground_truth_style, style.basis).max()
    _demo_check("style_recovery_angle", bool(ang_s < angle_gate),
                f"{ang_s:.6f} rad < {angle_gate}")
    ang_c = principal_angles(filled.ground_truth_content, content.basis).max()
    _demo_check("content_recovery_angle", bool(ang_c < angle_gate),
                f"{ang_c:.6f} rad < {angle_gate}")

    # edit stage invariants
    anchor_rows = triplet.anchor.data
    full = suppress_style(triplet.anchor, style, np.ones(n))
    resid = np.abs(full @ style.basis).max(axis=1)
    scale = np.linalg.norm(anchor_rows, axis=1)
    ortho = bool(np.all(resid <= 1e-6 * np.maximum(scale, 1e-30)))
    _demo_check("suppress_full_residual_orthogonal", ortho,
                f"max in-span residual {resid.max():.2e}")

    probe = AttentionTriple(
        q=triplet.anchor, k=triplet.positive,
        v=FeatureMatrix(np.ones((n, d))),
    )
    rows = edited_attention(probe)
    row_err = float(np.abs(rows - 1.0).max())
    _demo_check("attention_rows_normalized", bool(row_err <= 1e-6),
                f"max |row sum - 1| = {row_err:.2e}")

    qkv = AttentionTriple(q=triplet.anchor, k=triplet.positive, v=triplet.negative)
    edited = apply_dice_edit(qkv, style, content, params)
    delta_k = edited.k.data - qkv.k.data
    off_span = np.abs(delta_k - project_onto(delta_k, style)).max()
    norm_k = np.abs(qkv.k.data).max()
    _demo_check("edit_preserves_style_complement",
                bool(off_span <= 1e-8 * max(norm_k, 1.0)),
                f"complement drift {off_span:.2e}")

    out = args.out or "demo_out"
    os.makedirs(out, exist_ok=True)
    write_tensor(triplet.anchor, os.path.join(out, "anchor.dtf"))
    write_tensor(triplet.positive, os.path.join(out, "aligned_positive.dtf"))
    write_tensor(triplet.negative, os.path.join(out, "aligned_negative.dtf"))
    _write_json(os.path.join(out, INDICES_FILE), {
        "positive": list(range(n)), "negative": list(range(n)),
    })
    save_subspace(style, os.path.join(out, "style_subspace.dtf"))
    save_subspace(content, os.path.join(out, "content_subspace.dtf"))
    write_tensor(edited.q, os.path.join(out, "q_edited.dtf"))
    write_tensor(edited.k, os.path.join(out, "k_edited.dtf"))
    write_tensor(edited.v, os.path.join(out, "v_edited.dtf"))
    gamma = aec_mod.compute_gamma(qkv, style, params.aec)
    write_tensor(gamma.reshape(-1, 1), os.path.join(out, "gamma.dtf"))
    print(f"recovery angles: style={ang_s:.6f} content={ang_c:.6f} (rad)")
    print(f"artifacts -> {out}")
    if args.verbose:
        print(f"kernel backend: {_kernels.backend_name()}")
    return 0


# ------------------------------------------------------------------ main

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dice",
        description="Style/content subspace pipeline over DTF1 tensor files.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default=None, with_config=True, with_seed=False):
        if with_config:
            sp.add_argument("--config", help="pipeline config JSON")
        if out_default is not None:
            sp.add_argument("--out", default=out_default, help="output location")
        else:
            sp.add_argument("--out", help="output location")
        if with_seed:
            sp.add_argument("--seed", type=int, default=0, help="RNG seed (u64)")
        sp.add_argument("--verbose", action="store_true")

    sp = sub.add_parser("align", help="cosine-match positive/negative to the anchor")
    sp.add_argument("anchor")
    sp.add_argument("positive")
    sp.add_argument("negative")
    common(sp, out_default="aligned_out", with_config=False)
    sp.set_defaults(func=cmd_align)

    sp = sub.add_parser("fit", help="fit style and content subspaces")
    sp.add_argument("aligned_dir")
    common(sp, out_default="subspace_out")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("edit", help="apply the decoupled Q/K/V edit")
    sp.add_argument("qkv_manifest")
    sp.add_argument("subspace_dir")
    common(sp, out_default="edit_out")
    sp.set_defaults(func=cmd_edit)

    sp = sub.add_parser("dlpips", help="differential perceptual metrics from a manifest")
    sp.add_argument("manifest")
    common(sp, with_config=False)
    sp.set_defaults(func=cmd_dlpips)

    sp = sub.add_parser("demo-synthetic", help="end-to-end self-test on planted data")
    common(sp, with_seed=True)
    sp.add_argument("--noise-sigma", type=float, default=0.05)
    sp.set_defaults(func=cmd_demo_synthetic)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if getattr(args, "seed", 0) and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except DemoAssertionError as e:
        print(f"demo assertion failed: {e}", file=sys.stderr)
        return 1
    except ValidationError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return 2
    except FormatError as e:
        print(f"format error: {e}", file=sys.stderr)
        return 3
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
