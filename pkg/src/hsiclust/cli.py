"""The ``hsic`` command: pipeline subcommands mirroring the three-step method.

``train`` learns a dictionary from a scene, ``encode`` sparse-codes its
pixels, ``cluster`` groups the chosen features, ``evaluate`` scores a
partition against ground truth, ``grid`` sweeps dictionary size and
sparsity, ``render`` paints a partition as a PNG, ``convert`` rewrites cube
containers. Exit codes are stable for scripting: 0 success, 2 config error,
3 data error, 4 numeric error.

When a label map is configured, every stage works on the labeled pixels
only; the miscellaneous class (label 0) never reaches training, coding,
clustering or scoring.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import nmf_fit, pca_fit, pca_transform
from .clustering import kmeans, reduce_tile_codes, spectral_cluster
from .config import PipelineConfig, load_config
from .dictionary import TrainConfig, _unit_columns, extract_tiles, suggested_atom_count, train
from .errors import DataError, HsiClustError, NumericError, ParameterError
from .io import (
    flatten,
    load_codes,
    load_cube,
    load_dictionary,
    load_labels,
    save_codes,
    save_cube,
    save_dictionary,
)
from .metrics import summarize
from .pursuit import Dictionary, encode_all, somp
from .render import montage, render_partition, save_png


def _load_dataset(cfg: PipelineConfig):
    cube = load_cube(cfg.data, cfg.format)
    lmap = load_labels(cfg.labels) if cfg.labels else None
    pixels, gt = flatten(cube, lmap, normalize=cfg.normalize)
    return cube, lmap, pixels, gt


def _train_config(cfg: PipelineConfig, bands: int) -> TrainConfig:
    atoms = cfg.scalar("atoms") or suggested_atom_count(bands)
    return TrainConfig(
        n_atoms=atoms,
        sparsity=cfg.scalar("sparsity"),
        iterations=cfg.iterations,
        lam=cfg.lam,
        seed=cfg.seed,
        tile=tuple(cfg.tile) if cfg.tile else None,
        batch_size=cfg.batch,
    )


def _bare_dictionary(loaded) -> Dictionary:
    return loaded.dictionary if hasattr(loaded, "dictionary") else loaded


def _run_train(cfg: PipelineConfig, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    cube, _, pixels, _ = _load_dataset(cfg)
    tcfg = _train_config(cfg, cube.bands)
    if tcfg.tile is not None:
        state, trace = train(cube, tcfg, allow_undercomplete=cfg.allow_undercomplete)
    else:
        state, trace = train(pixels, tcfg, allow_undercomplete=cfg.allow_undercomplete)
    dict_path = out / "dictionary.sdict"
    save_dictionary(state, dict_path)
    with open(out / "training_trace.csv", "w") as fh:
        fh.write("iteration,residual_norm\n")
        for i, resid in enumerate(trace, start=1):
            fh.write(f"{i},{resid:.17g}\n")
    window = trace[-min(100, trace.size) :]
    print(
        f"trained {tcfg.n_atoms} atoms for {tcfg.iterations} iterations; "
        f"mean residual over last {window.size}: {window.mean():.6g}"
    )
    return dict_path


def _run_encode(cfg: PipelineConfig, dict_path: Path, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    _, _, pixels, _ = _load_dataset(cfg)
    d = _bare_dictionary(load_dictionary(dict_path))
    if d.m != pixels.m:
        raise DataError(f"dictionary expects {d.m} bands, data has {pixels.m}")
    codes = encode_all(d, pixels, cfg.scalar("sparsity"))
    codes_path = out / "codes.scode"
    save_codes(codes, codes_path)
    np.save(out / "coords.npy", pixels.coords)
    err = np.linalg.norm(pixels.columns - d.atoms @ codes.to_dense(), axis=0).mean()
    print(f"encoded {codes.n} pixels; mean reconstruction error {err:.6g}")
    return codes_path


def _tile_features(cfg: PipelineConfig, cube, lmap, dict_path: Path):
    """Jointly code every interior tile and reduce each to one pixel column."""
    d = _bare_dictionary(load_dictionary(dict_path))
    if d.m != cube.bands:
        raise DataError(f"dictionary expects {d.m} bands, data has {cube.bands}")
    p, q = cfg.tile
    s = cfg.scalar("sparsity")
    coords = []
    codes = []
    for tile, center in extract_tiles(cube, p, q):
        if cfg.normalize:
            tile = _unit_columns(tile)
        codes.append(somp(d, tile, s, shape=(p, q)))
        coords.append(center)
    features = reduce_tile_codes(codes, cfg.reduce)
    coords = np.asarray(coords, dtype=np.int64)
    if lmap is not None:
        keep = lmap.labels[coords[:, 0], coords[:, 1]] != 0
        if not keep.any():
            raise DataError("no labeled pixel lies in the tile interior")
        features = features[:, keep]
        coords = coords[keep]
    return features, coords


def _run_cluster(
    cfg: PipelineConfig,
    out: Path,
    codes_path: Path | None = None,
    dict_path: Path | None = None,
) -> tuple[Path, Path, dict]:
    out.mkdir(parents=True, exist_ok=True)
    cube, lmap, pixels, gt = _load_dataset(cfg)

    if cfg.source == "pixels":
        features, coords = pixels.columns, pixels.coords
    elif cfg.source == "pca":
        model = pca_fit(pixels, cfg.pca_components)
        features, coords = pca_transform(model, pixels), pixels.coords
    elif cfg.source == "nmf":
        model = nmf_fit(pixels, cfg.nmf_components, cfg.nmf_iters, cfg.seed)
        features, coords = model.h, pixels.coords
    elif cfg.source == "sparse" and cfg.tile is not None:
        if dict_path is None:
            raise ParameterError("sparse source with a tile config needs --dict")
        features, coords = _tile_features(cfg, cube, lmap, dict_path)
    else:  # sparse, per-pixel codes
        if codes_path is None:
            raise ParameterError("sparse source needs --codes (run 'hsic encode' first)")
        codes = load_codes(codes_path)
        if codes.n != pixels.n:
            raise DataError(f"codes hold {codes.n} pixels, dataset has {pixels.n}")
        features, coords = codes.to_dense(), pixels.coords

    if cfg.clusters is not None:
        c = cfg.clusters
    elif lmap is not None:
        c = lmap.n_classes
    else:
        raise ParameterError("set 'clusters' in the config or provide labels")

    if cfg.method == "kmeans":
        part = kmeans(features, c, seed=cfg.seed)
    else:
        part = spectral_cluster(
            features, c, k_nn=cfg.k_nn, seed=cfg.seed, mode=cfg.affinity, sigma=cfg.sigma
        )

    part_path = out / "partition.npy"
    coords_path = out / "coords.npy"
    np.save(part_path, part.labels.astype(np.uint32))
    np.save(coords_path, coords)
    summary = {
        "n": part.n,
        "clusters": c,
        "source": cfg.source,
        "method": cfg.method,
        "seed": cfg.seed,
    }
    if lmap is not None:
        aligned_gt = lmap.labels[coords[:, 0], coords[:, 1]]
        summary["ami"] = summarize(aligned_gt, part.labels)["ami"]
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(json.dumps(summary))
    return part_path, coords_path, summary


def _load_partition_file(path) -> np.ndarray:
    try:
        arr = np.load(path, allow_pickle=False)
    except (ValueError, OSError, EOFError) as exc:
        raise DataError(f"{path}: cannot read partition: {exc}") from exc
    if arr.ndim != 1 or not np.issubdtype(arr.dtype, np.integer):
        raise DataError(f"{path}: partition must be a 1-D integer array")
    return arr.astype(np.int64)


def _run_evaluate(partition_path, labels_path, coords_path) -> dict:
    part = _load_partition_file(partition_path)
    lmap = load_labels(labels_path)
    if coords_path is None:
        sidecar = Path(partition_path).parent / "coords.npy"
        coords_path = sidecar if sidecar.exists() else None
    if coords_path is not None:
        coords = np.load(coords_path, allow_pickle=False)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise DataError(f"{coords_path}: coords must be (n, 2)")
        if coords.shape[0] != part.size:
            raise DataError(
                f"coords cover {coords.shape[0]} pixels, partition has {part.size}"
            )
        if (
            coords.min() < 0
            or coords[:, 0].max() >= lmap.rows
            or coords[:, 1].max() >= lmap.cols
        ):
            raise DataError("coords fall outside the label map")
        gt = lmap.labels[coords[:, 0], coords[:, 1]]
        if (gt == 0).any():
            raise DataError("partition covers pixels with no ground-truth label")
    else:
        gt = lmap.labels[lmap.labels != 0]
        if gt.size != part.size:
            raise DataError(
                f"partition length {part.size} does not match {gt.size} labeled pixels"
            )
    result = summarize(gt, part)
    print(json.dumps(result))
    return result


def _run_grid(cfg: PipelineConfig, out: Path) -> None:
    if not cfg.labels:
        raise ParameterError("grid needs ground-truth labels for the AMI table")
    if cfg.source != "sparse":
        raise ParameterError("grid sweeps dictionaries; set source = sparse")
    atoms_list = cfg.value_list("atoms")
    sparsity_list = cfg.value_list("sparsity")
    if not atoms_list or not sparsity_list:
        raise ParameterError("grid lists must be nonempty")
    out.mkdir(parents=True, exist_ok=True)
    cube = load_cube(cfg.data, cfg.format)

    rows = []
    maps: list[list[np.ndarray | None]] = [
        [None] * len(sparsity_list) for _ in atoms_list
    ]
    cell = 0
    for i, n_atoms in enumerate(atoms_list):
        for j, sparsity in enumerate(sparsity_list):
            cell_cfg = dataclasses.replace(
                cfg, atoms=n_atoms, sparsity=sparsity, seed=cfg.seed + cell
            )
            cell_dir = out / f"cell_k{n_atoms}_s{sparsity}"
            try:
                dict_path = _run_train(cell_cfg, cell_dir)
                codes_path = _run_encode(cell_cfg, dict_path, cell_dir)
                part_path, coords_path, summary = _run_cluster(
                    cell_cfg, cell_dir, codes_path=codes_path, dict_path=dict_path
                )
                rows.append((n_atoms, sparsity, f"{summary['ami']:.6f}", "ok"))
                maps[i][j] = render_partition(
                    np.load(part_path).astype(np.int64),
                    np.load(coords_path),
                    cube.rows,
                    cube.cols,
                )
            except HsiClustError as exc:
                rows.append((n_atoms, sparsity, "", f"error: {exc}"))
            cell += 1

    with open(out / "grid_ami.csv", "w") as fh:
        fh.write("atoms,sparsity,ami,status\n")
        for n_atoms, sparsity, score, status in rows:
            fh.write(f'{n_atoms},{sparsity},{score},"{status}"\n')
    save_png(montage(maps), out / "grid_montage.png")
    print(f"grid finished: {sum(1 for r in rows if r[3] == 'ok')}/{len(rows)} cells ok")


def _load_palette(path) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected R,G,B")
        rows.append([int(v) for v in parts])
    if not rows:
        raise DataError(f"{path}: empty palette")
    return np.asarray(rows, dtype=np.uint8)


def _resolve_artifact(explicit, out_dir: str, default_name: str, what: str) -> Path:
    if explicit is not None:
        return Path(explicit)
    candidate = Path(out_dir) / default_name
    if candidate.exists():
        return candidate
    raise ParameterError(f"no --{what} given and {candidate} does not exist")


def _overrides(args) -> dict:
    values = {}
    for key in ("seed", "out", "reduce"):
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    tile = getattr(args, "tile", None)
    if tile is not None:
        values["tile"] = list(tile)
    return values


def _cmd_train(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    _run_train(cfg, Path(cfg.out))
    return 0


def _cmd_encode(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    dict_path = _resolve_artifact(args.dict, cfg.out, "dictionary.sdict", "dict")
    _run_encode(cfg, dict_path, Path(cfg.out))
    return 0


def _cmd_cluster(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    codes_path = args.codes
    dict_path = args.dict
    if cfg.source == "sparse":
        if cfg.tile is not None:
            dict_path = _resolve_artifact(dict_path, cfg.out, "dictionary.sdict", "dict")
        elif codes_path is None:
            codes_path = _resolve_artifact(None, cfg.out, "codes.scode", "codes")
    _run_cluster(cfg, Path(cfg.out), codes_path=codes_path, dict_path=dict_path)
    return 0


def _cmd_evaluate(args) -> int:
    _run_evaluate(args.partition, args.labels, args.coords)
    return 0


def _cmd_grid(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    _run_grid(cfg, Path(cfg.out))
    return 0


def _cmd_render(args) -> int:
    labels = _load_partition_file(args.partition)
    coords_path = args.coords
    if coords_path is None:
        coords_path = Path(args.partition).parent / "coords.npy"
        if not coords_path.exists():
            raise ParameterError("no --coords given and no coords.npy beside the partition")
    coords = np.load(coords_path, allow_pickle=False)
    palette = _load_palette(args.palette) if args.palette else None
    img = render_partition(labels, coords, args.rows, args.cols, palette)
    save_png(img, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_convert(args) -> int:
    src = args.from_format
    if src is None:
        src = "npy" if str(args.input).endswith(".npy") else "hsraw"
    cube = load_cube(args.input, src)
    save_cube(cube, args.output, args.to)
    print(f"wrote {args.output} ({cube.rows}x{cube.cols}x{cube.bands}, {args.to})")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsic",
        description="Cluster hyperspectral pixels via learned sparse features.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")

    p = sub.add_parser("train", help="learn a dictionary from the configured scene")
    common(p)
    p.add_argument("--tile", nargs=2, type=int, metavar=("P", "Q"), default=None,
                   help="train on sliding P x Q tiles instead of single pixels")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("encode", help="sparse-code every retained pixel")
    common(p)
    p.add_argument("--dict", default=None, help="dictionary file (default: <out>/dictionary.sdict)")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("cluster", help="cluster the configured feature source")
    common(p)
    p.add_argument("--codes", default=None, help="SCODE file (default: <out>/codes.scode)")
    p.add_argument("--dict", default=None, help="dictionary file, needed for tile configs")
    p.add_argument("--reduce", choices=("mean", "center"), default=None,
                   help="tile-to-pixel reduction for tile configs")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("evaluate", help="score a partition against ground truth")
    p.add_argument("--partition", required=True, help="partition npy file")
    p.add_argument("--labels", required=True, help="ground-truth label map npy file")
    p.add_argument("--coords", default=None, help="coords sidecar (default: beside partition)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("grid", help="sweep dictionary size x sparsity")
    common(p)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("render", help="paint a partition as a PNG cluster map")
    p.add_argument("--partition", required=True)
    p.add_argument("--coords", default=None)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--palette", default=None, help="file of R,G,B lines")
    p.add_argument("--out", default="partition.png")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("convert", help="rewrite a cube between npy and hsraw")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--to", choices=("npy", "hsraw"), required=True)
    p.add_argument("--from", dest="from_format", choices=("npy", "hsraw"), default=None)
    p.set_defaults(func=_cmd_convert)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except (DataError, HsiClustError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
