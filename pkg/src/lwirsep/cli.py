"""Command-line surface: simulate | train | retrieve | evaluate.

Every command is deterministic given (config, seed, inputs) and writes a run
manifest next to its outputs. Exit codes: 0 success, 2 configuration error,
3 data/file error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .atmosphere import AtmosphereModel, atmosphere_from_config
from .configio import (
    file_sha256,
    parse_bool,
    read_config,
    reject_unknown,
    take,
    write_run_manifest,
)
from .data import (
    compute_norm_stats,
    generate_field_like,
    generate_sweep,
    read_dataset,
    split,
    write_dataset,
)
from .errors import (
    ConfigError,
    DataFormatError,
    DegenerateInversionError,
    TrainingDivergedError,
)
from .evaluation import (
    component_errors,
    ebt_noise_study,
    purity_classification,
    residual_fields,
    residual_fields_to_csv,
)
from .materials import build_material_library, material_library_hash
from .nn.network import HybridNetwork
from .records import SOURCE_SIMULATED
from .retrieval import (
    CRITERION_MAE,
    CRITERION_MAE_PLUS_NORM,
    TemperatureGrid,
    grid_search_temperature,
)
from .spectral import SpectralGrid
from .training import (
    TrainConfig,
    TrainingData,
    load_checkpoint,
    save_checkpoint,
    train,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _ensure_outdir(path: Path, force: bool, expected: list[str]) -> None:
    path.mkdir(parents=True, exist_ok=True)
    clashes = [name for name in expected if (path / name).exists()]
    if clashes and not force:
        raise ConfigError(
            f"output files already exist in {path} ({', '.join(clashes)}); use --force to overwrite")


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("LWIR_WORKERS", "")
    return max(1, int(env)) if env.isdigit() and env else 1


# -- simulate -------------------------------------------------------------------


def cmd_simulate(args) -> int:
    started = time.time()
    cfg = read_config(args.config)
    grid = SpectralGrid.default()

    atm_lines = [f"{k[4:]} = {v}" for k, v in list(cfg.items()) if k.startswith("atm.")]
    for k in [k for k in cfg if k.startswith("atm.")]:
        del cfg[k]
    atm = atmosphere_from_config("\n".join(atm_lines)) if atm_lines else AtmosphereModel()

    seed = args.seed if args.seed is not None else take(cfg, "seed", int, default=42)
    library = build_material_library(seed, grid)
    by_name = {m.name: m for m in library}

    names_raw = take(cfg, "sweep.materials", str, default="all")
    if names_raw == "all":
        materials = library
    else:
        names = [n.strip() for n in names_raw.split(",") if n.strip()]
        unknown = [n for n in names if n not in by_name]
        if unknown:
            raise ConfigError(f"unknown material name(s): {', '.join(unknown)}")
        materials = [by_name[n] for n in names]
    angle_stride = take(cfg, "sweep.angle_stride", int, default=1)
    range_stride = take(cfg, "sweep.range_stride", int, default=1)
    temps_raw = take(cfg, "sweep.temperatures", str, default="")
    temperatures = tuple(float(t) for t in temps_raw.split(",") if t.strip()) or None

    field_n = take(cfg, "field.n_pixels", int, default=0)
    field_material = take(cfg, "field.material", str, default="grass")
    field_T = take(cfg, "field.temperature", float, default=285.0)
    field_pert = take(cfg, "field.perturbation_scale", float, default=0.05)
    field_noise = take(cfg, "field.noise_sigma", float, default=0.002)
    field_labeled = take(cfg, "field.labeled_fraction", float, default=1.0)
    field_seed = take(cfg, "field.seed", int, default=seed + 1)
    field_impure = take(cfg, "field.impure_fraction", float, default=0.0)
    field_impurity_mat = take(cfg, "field.impure_material", str, default="")
    reject_unknown(cfg, "simulate")

    out = Path(args.out)
    _ensure_outdir(out, args.force, ["simulated.lwirds", "field.lwirds"])
    mat_hash = material_library_hash(library)
    extra = {"material_seed": seed}

    sim = generate_sweep(atm, materials, grid, angle_stride=angle_stride,
                         range_stride=range_stride, temperatures=temperatures)
    write_dataset(sim, out / "simulated.lwirds", grid=grid, material_hash=mat_hash,
                  atm=atm, extra=extra)
    hashes = {"simulated": file_sha256(out / "simulated.lwirds")}
    print(f"wrote {len(sim)} simulated records to {out / 'simulated.lwirds'}")

    if field_n > 0:
        if field_material not in by_name:
            raise ConfigError(f"unknown material name(s): {field_material}")
        impurity = None
        if field_impure > 0:
            if field_impurity_mat not in by_name:
                raise ConfigError(f"unknown material name(s): {field_impurity_mat}")
            impurity = by_name[field_impurity_mat]
        fld = generate_field_like(atm, field_pert, field_noise, field_n,
                                  by_name[field_material], field_T, seed=field_seed,
                                  labeled_fraction=field_labeled,
                                  impure_fraction=field_impure,
                                  impurity_material=impurity, grid=grid)
        write_dataset(fld, out / "field.lwirds", grid=grid, material_hash=mat_hash,
                      atm=atm, extra={**extra, "field_seed": field_seed})
        hashes["field"] = file_sha256(out / "field.lwirds")
        print(f"wrote {len(fld)} field-like records to {out / 'field.lwirds'}")

    write_run_manifest(out, "simulate", seed=seed, config_hash=file_sha256(args.config),
                       dataset_hashes=hashes, started=started)
    return EXIT_OK


# -- train ----------------------------------------------------------------------


def _load_data_dir(data_dir: Path, grid):
    sim_path = data_dir / "simulated.lwirds"
    if not sim_path.exists():
        raise DataFormatError(f"no simulated.lwirds in {data_dir}")
    sim, sim_manifest = read_dataset(sim_path, expected_grid=grid)
    field_path = data_dir / "field.lwirds"
    fld, fld_manifest = ([], {})
    if field_path.exists():
        fld, fld_manifest = read_dataset(field_path, expected_grid=grid)
    return sim, sim_manifest, fld, fld_manifest


def cmd_train(args) -> int:
    started = time.time()
    cfg_text = read_config(args.config)
    grid = SpectralGrid.default()

    cfg_epochs = take(cfg_text, "epochs", int, default=200)
    cfg_seed = take(cfg_text, "seed", int, default=0)
    cfg_mode = take(cfg_text, "mode", str, default="mixed")
    epochs = args.epochs if args.epochs is not None else cfg_epochs
    seed = args.seed if args.seed is not None else cfg_seed
    mode_raw = args.mode if args.mode is not None else cfg_mode
    mode = {"mixed": "mixed", "ill-posed": "ill_posed_only",
            "ill_posed_only": "ill_posed_only"}.get(mode_raw)
    if mode is None:
        raise ConfigError(f"unknown mode {mode_raw!r}")
    try:
        cfg = TrainConfig(
            epochs=epochs,
            batch_size=take(cfg_text, "batch_size", int, default=32),
            learning_rate=take(cfg_text, "learning_rate", float, default=1e-3),
            adam_beta1=take(cfg_text, "adam_beta1", float, default=0.9),
            adam_beta2=take(cfg_text, "adam_beta2", float, default=0.999),
            adam_eps=take(cfg_text, "adam_eps", float, default=1e-8),
            seed=seed,
            mode=mode,
            sim_to_field_ratio=take(cfg_text, "sim_to_field_ratio", int, default=2),
            input_scale=take(cfg_text, "input_scale", parse_bool, default=False),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    split_seed = take(cfg_text, "split_seed", int, default=7)
    field_split_seed = take(cfg_text, "field_split_seed", int, default=split_seed + 1)
    expected_hash = take(cfg_text, "expected_dataset_hash", str, default="")
    reject_unknown(cfg_text, "train")

    data_dir = Path(args.data)
    if expected_hash:
        actual = file_sha256(data_dir / "simulated.lwirds")
        if actual != expected_hash:
            raise DataFormatError(
                f"dataset hash mismatch: config expects {expected_hash}, file is {actual}")

    sim, sim_manifest, fld, _ = _load_data_dir(data_dir, grid)
    material_seed = int(sim_manifest.get("material_seed", 42))
    library = build_material_library(material_seed, grid)
    if material_library_hash(library) != sim_manifest.get("material_hash"):
        raise DataFormatError("material library hash mismatch against dataset manifest")

    sim_split = split(sim, split_seed)
    sim_train = [sim[i] for i in sim_split.train]
    sim_val = [sim[i] for i in sim_split.validation]
    if fld:
        fld_split = split(fld, field_split_seed)
        fld_train = [fld[i] for i in fld_split.train]
        fld_val = [fld[i] for i in fld_split.validation]
    else:
        fld_train, fld_val = [], []
    stats = compute_norm_stats(sim_train + fld_train)
    data = TrainingData(sim_train, sim_val, fld_train, fld_val, stats, library, grid)

    out = Path(args.out)
    _ensure_outdir(out, args.force, ["best.ckpt", "last.ckpt", "report.csv"])

    optimizer, start_epoch = None, 0
    if args.from_checkpoint:
        net, ckpt_stats, info = load_checkpoint(args.from_checkpoint, expected_grid=grid)
        stats = ckpt_stats
        data.stats = ckpt_stats
        start_epoch = info["epoch"]
        if "make_optimizer" in info:
            optimizer = info["make_optimizer"](cfg)
        print(f"resuming from {args.from_checkpoint} at epoch {start_epoch}")
    else:
        net = HybridNetwork(seed=cfg.seed, grid=grid, input_scale=cfg.input_scale)

    report, best_state, optimizer = train(net, data, cfg, start_epoch=start_epoch,
                                          optimizer=optimizer,
                                          log_every=args.log_every)
    extra = {"split_seed": split_seed, "field_split_seed": field_split_seed,
             "material_seed": material_seed, "mode": cfg.mode,
             "best_epoch": report.best_epoch,
             "best_val_loss": repr(report.best_val_loss)}
    save_checkpoint(out / "last.ckpt", net, stats, optimizer=optimizer,
                    epoch=cfg.epochs, extra=extra)
    final_state = net.state_vector()
    net.load_state(best_state)
    save_checkpoint(out / "best.ckpt", net, stats, epoch=report.best_epoch + 1, extra=extra)
    net.load_state(final_state)
    (out / "report.csv").write_text(report.to_csv())
    write_run_manifest(
        out, "train", seed=cfg.seed, config_hash=file_sha256(args.config),
        dataset_hashes={"simulated": file_sha256(data_dir / "simulated.lwirds")},
        started=started,
        extra={"epochs": cfg.epochs, "mode": cfg.mode, "best_epoch": report.best_epoch,
               "wall_time_s": f"{report.wall_time_s:.1f}"})
    print(f"trained {cfg.epochs} epochs ({report.wall_time_s:.1f}s); "
          f"best validation {report.best_val_loss:.6f} at epoch {report.best_epoch}")
    return EXIT_OK


# -- retrieve -------------------------------------------------------------------


def _parse_t_grid(raw: str) -> TemperatureGrid:
    parts = raw.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--t-grid expects min:max:step, got {raw!r}")
    try:
        return TemperatureGrid(float(parts[0]), float(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _tes_one(task):
    (l_total, l_up, l_down, tau, eps_bar, t_grid, criterion, wavelengths) = task
    res = grid_search_temperature(l_total, l_up, l_down, tau, eps_bar, t_grid,
                                  criterion, wavelengths)
    return res


def run_tes(records, net, stats, library, grid, t_grid, criterion,
            eps_bar_override=None, workers: int = 1):
    """Per-pixel TES over ``records`` using network-predicted atmosphere."""
    from .evaluation import predict_components

    pred = predict_components(net, records, stats)
    by_id = {m.id: m for m in library}
    tasks = []
    for i, rec in enumerate(records):
        if eps_bar_override is not None:
            eps_bar = eps_bar_override
        else:
            try:
                eps_bar = by_id[rec.material_id].eps_bar
            except Exception as exc:
                raise ConfigError(
                    "unlabeled records need --eps-bar to supply the assumed emissivity") from exc
        tasks.append((rec.L_total, pred["L_up"][i], pred["L_down"][i], pred["tau"][i],
                      eps_bar, t_grid, criterion, grid.wavelengths_um))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_tes_one, tasks, chunksize=32))
    else:
        results = [_tes_one(t) for t in tasks]
    return results


def write_tes_csv(results, t_grid, path) -> None:
    t_values = t_grid.values()
    header = ["pixel", "criterion", "t_hat"]
    header += [f"mae_at_{T:g}K" for T in t_values]
    header += [f"norm_mae_at_{T:g}K" for T in t_values]
    header += [f"eps_{i}" for i in range(len(results[0].emissivity))]
    lines = [",".join(header)]
    for i, res in enumerate(results):
        row = [str(i), res.criterion, f"{res.t_hat:g}"]
        row += [f"{mae:.8e}" for _, mae, _ in res.table]
        row += ["" if np.isnan(nm) else f"{nm:.8e}" for _, _, nm in res.table]
        row += [f"{e:.10e}" if np.isfinite(e) else "" for e in res.emissivity]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_retrieve(args) -> int:
    started = time.time()
    grid = SpectralGrid.default()
    net, stats, info = load_checkpoint(args.checkpoint, expected_grid=grid)
    data_path = Path(args.data)
    dataset_file = data_path if data_path.is_file() else None
    if dataset_file is None:
        for candidate in ("field.lwirds", "simulated.lwirds"):
            if (data_path / candidate).exists():
                dataset_file = data_path / candidate
                break
    if dataset_file is None:
        raise DataFormatError(f"no dataset found at {args.data}")
    records, manifest = read_dataset(dataset_file, expected_grid=grid)
    material_seed = int(manifest.get("material_seed", 42))
    library = build_material_library(material_seed, grid)
    if material_library_hash(library) != manifest.get("material_hash"):
        raise DataFormatError("material library hash mismatch against dataset manifest")

    criterion = {"mae": CRITERION_MAE, "mae+norm": CRITERION_MAE_PLUS_NORM}[args.criterion]
    t_grid = _parse_t_grid(args.t_grid)
    out = Path(args.out)
    _ensure_outdir(out, args.force, ["tes.csv", "tes_summary.csv"])

    results = run_tes(records, net, stats, library, grid, t_grid, criterion,
                      eps_bar_override=args.eps_bar, workers=_workers(args))
    write_tes_csv(results, t_grid, out / "tes.csv")

    t_hats = np.array([r.t_hat for r in results])
    lines = ["metric,value",
             f"pixels,{len(results)}",
             f"criterion,{criterion}",
             "aggregation,per_pixel",
             f"t_hat_mean,{t_hats.mean():.4f}",
             f"t_hat_min,{t_hats.min():g}",
             f"t_hat_max,{t_hats.max():g}"]
    (out / "tes_summary.csv").write_text("\n".join(lines) + "\n")
    write_run_manifest(out, "retrieve", seed=info["epoch"],
                       config_hash="", dataset_hashes={"input": file_sha256(dataset_file)},
                       started=started,
                       extra={"checkpoint": args.checkpoint, "criterion": criterion,
                              "t_grid": args.t_grid})
    print(f"retrieved {len(results)} pixels; t_hat in [{t_hats.min():g}, {t_hats.max():g}] K")
    return EXIT_OK


# -- evaluate -------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    started = time.time()
    grid = SpectralGrid.default()
    net, stats, info = load_checkpoint(args.checkpoint, expected_grid=grid)
    data_dir = Path(args.data)
    sim, sim_manifest, fld, _ = _load_data_dir(data_dir, grid)
    if not sim:
        raise DataFormatError("evaluation needs the simulated dataset for ground truth")
    material_seed = int(sim_manifest.get("material_seed", 42))
    library = build_material_library(material_seed, grid)
    if material_library_hash(library) != sim_manifest.get("material_hash"):
        raise DataFormatError("material library hash mismatch against dataset manifest")
    atm = sim_manifest.get("_atmosphere")
    if atm is None:
        raise DataFormatError("dataset manifest lacks the atmosphere block")

    split_seed = int(info["manifest"].get("split_seed", 7))
    sim_split = split(sim, split_seed)
    test_records = [sim[i] for i in sim_split.test]

    out = Path(args.out)
    _ensure_outdir(out, args.force,
                   ["component_errors.csv", "residual_fields.csv", "purity.csv"])

    table_true = component_errors(net, test_records, stats, library, grid, "true")
    table_false = component_errors(net, test_records, stats, library, grid, "false")
    (out / "component_errors.csv").write_text(
        table_true.to_csv() + "".join(table_false.to_csv().splitlines(True)[1:]))

    by_id = {m.id: m for m in library}
    mat = by_id[test_records[0].material_id]
    fields_r = residual_fields(net, atm, mat, stats, grid, fixed_range_m=5000.0)
    fields_a = residual_fields(net, atm, mat, stats, grid, fixed_angle_deg=30.0)
    csv_r = residual_fields_to_csv(fields_r)
    csv_a = residual_fields_to_csv(fields_a)
    (out / "residual_fields.csv").write_text(csv_r + "".join(csv_a.splitlines(True)[1:]))

    t_grid = TemperatureGrid()
    results = run_tes(test_records, net, stats, library, grid, t_grid,
                      CRITERION_MAE, workers=_workers(args))
    truths = [by_id[r.material_id].emissivity for r in test_records]
    fractions = purity_classification(results, truths)
    purity_lines = ["threshold,fraction_below"]
    purity_lines += [f"{t},{frac:.6f}" for t, frac in sorted(fractions.items(), reverse=True)]
    (out / "purity.csv").write_text("\n".join(purity_lines) + "\n")

    per_band_mae, per_material_mae, _ = ebt_noise_study(test_records[:200], library, grid)
    ebt_lines = ["wavelength_um,temperature_mae_K"]
    ebt_lines += [f"{wl},{v:.6f}" for wl, v in zip(grid.wavelengths_um, per_band_mae)
                  if np.isfinite(v)]
    (out / "ebt_noise.csv").write_text("\n".join(ebt_lines) + "\n")

    # embedded invariant checks
    failures = []
    for comp in ("L_down", "L_up", "tau"):
        if table_true.rows[comp] != table_false.rows[comp]:
            failures.append(f"atmospheric row {comp} differs between target modes")
    for table in (table_true, table_false):
        for comp, (_, mae, rmse) in table.rows.items():
            if rmse < mae:
                failures.append(f"RMSE < MAE for {comp} ({table.target_mode} mode)")
    write_run_manifest(out, "evaluate", seed=split_seed, config_hash="",
                       dataset_hashes={"simulated": file_sha256(data_dir / "simulated.lwirds")},
                       started=started,
                       extra={"checkpoint": args.checkpoint,
                              "invariant_failures": len(failures)})
    if failures:
        for f in failures:
            print(f"INVARIANT FAILURE: {f}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"evaluation bundle written to {out}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lwirsep",
                                description="LWIR atmospheric correction toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate simulated + field-like datasets")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=None, help="override config seed")
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_simulate)

    tp = sub.add_parser("train", help="train the hybrid network")
    tp.add_argument("--config", required=True)
    tp.add_argument("--data", required=True)
    tp.add_argument("--out", required=True)
    tp.add_argument("--mode", choices=["mixed", "ill-posed"], default=None)
    tp.add_argument("--epochs", type=int, default=None)
    tp.add_argument("--seed", type=int, default=None)
    tp.add_argument("--from-checkpoint", default=None)
    tp.add_argument("--workers", type=int, default=None)
    tp.add_argument("--log-every", type=int, default=0)
    tp.add_argument("--force", action="store_true")
    tp.set_defaults(func=cmd_train)

    rp = sub.add_parser("retrieve", help="temperature-emissivity separation")
    rp.add_argument("--checkpoint", required=True)
    rp.add_argument("--data", required=True)
    rp.add_argument("--out", required=True)
    rp.add_argument("--criterion", choices=["mae", "mae+norm"], default="mae")
    rp.add_argument("--t-grid", default="280:320:5")
    rp.add_argument("--eps-bar", type=float, default=None)
    rp.add_argument("--workers", type=int, default=None)
    rp.add_argument("--force", action="store_true")
    rp.set_defaults(func=cmd_retrieve)

    ep = sub.add_parser("evaluate", help="error tables, residual fields, purity")
    ep.add_argument("--checkpoint", required=True)
    ep.add_argument("--data", required=True)
    ep.add_argument("--out", required=True)
    ep.add_argument("--workers", type=int, default=None)
    ep.add_argument("--force", action="store_true")
    ep.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergedError, DegenerateInversionError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
