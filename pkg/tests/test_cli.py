import numpy as np
import pytest

from lwirsep.cli import main
from lwirsep.data import read_dataset
from lwirsep.training import load_checkpoint

TINY_SIM_CFG = """\
seed = 42
sweep.materials = grass,aluminum,smooth_01
sweep.angle_stride = 10
sweep.range_stride = 12
sweep.temperatures = 295,315
field.n_pixels = 24
field.material = grass
field.temperature = 285
field.perturbation_scale = 0.02
field.noise_sigma = 0.002
field.seed = 11
"""

TINY_TRAIN_CFG = """\
epochs = 2
batch_size = 8
learning_rate = 0.001
seed = 3
mode = mixed
input_scale = on
split_seed = 7
field_split_seed = 8
"""


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    """simulate + train once; downstream commands reuse the artifacts."""
    root = tmp_path_factory.mktemp("cli")
    sim_cfg = root / "sim.cfg"
    sim_cfg.write_text(TINY_SIM_CFG)
    train_cfg = root / "train.cfg"
    train_cfg.write_text(TINY_TRAIN_CFG)
    data = root / "data"
    run = root / "run"
    assert main(["simulate", "--config", str(sim_cfg), "--out", str(data)]) == 0
    assert main(["train", "--config", str(train_cfg), "--data", str(data),
                 "--out", str(run)]) == 0
    return root, sim_cfg, train_cfg, data, run


class TestSimulate:
    def test_record_counts(self, tiny_run, grid):
        _, _, _, data, _ = tiny_run
        sim, _ = read_dataset(data / "simulated.lwirds")
        fld, _ = read_dataset(data / "field.lwirds")
        assert len(sim) == 3 * 4 * 3 * 2  # materials x angles x ranges x temps
        assert len(fld) == 24

    def test_rerun_same_seed_byte_identical(self, tiny_run):
        root, sim_cfg, _, data, _ = tiny_run
        out2 = root / "data2"
        assert main(["simulate", "--config", str(sim_cfg), "--out", str(out2)]) == 0
        assert (data / "simulated.lwirds").read_bytes() == (out2 / "simulated.lwirds").read_bytes()
        assert (data / "field.lwirds").read_bytes() == (out2 / "field.lwirds").read_bytes()

    def test_refuses_overwrite_without_force(self, tiny_run):
        _, sim_cfg, _, data, _ = tiny_run
        assert main(["simulate", "--config", str(sim_cfg), "--out", str(data)]) == 2
        assert main(["simulate", "--config", str(sim_cfg), "--out", str(data),
                     "--force"]) == 0

    def test_unknown_key_named_and_exit_2(self, tiny_run, capsys):
        root, *_ = tiny_run
        bad = root / "bad.cfg"
        bad.write_text(TINY_SIM_CFG + "sweep.bogus_knob = 3\n")
        assert main(["simulate", "--config", str(bad), "--out", str(root / "x")]) == 2
        assert "bogus_knob" in capsys.readouterr().err

    def test_unknown_material_exit_2(self, tiny_run):
        root, *_ = tiny_run
        bad = root / "badmat.cfg"
        bad.write_text("sweep.materials = vibranium\n")
        assert main(["simulate", "--config", str(bad), "--out", str(root / "y")]) == 2

    def test_manifest_written(self, tiny_run):
        _, _, _, data, _ = tiny_run
        text = (data / "manifest.txt").read_text()
        assert "command = simulate" in text
        assert "dataset_hash.simulated" in text


class TestTrain:
    def test_outputs_exist(self, tiny_run):
        _, _, _, _, run = tiny_run
        for name in ("best.ckpt", "last.ckpt", "report.csv", "manifest.txt"):
            assert (run / name).exists()

    def test_report_has_one_row_per_epoch(self, tiny_run):
        _, _, _, _, run = tiny_run
        lines = (run / "report.csv").read_text().strip().splitlines()
        assert len(lines) == 3  # header + 2 epochs

    def test_ill_posed_flag(self, tiny_run):
        root, _, train_cfg, data, _ = tiny_run
        out = root / "run_ill"
        assert main(["train", "--config", str(train_cfg), "--data", str(data),
                     "--out", str(out), "--mode", "ill-posed", "--epochs", "1"]) == 0
        report = (out / "report.csv").read_text().strip().splitlines()
        # no simulated phase: loss1 column is zero
        assert float(report[1].split(",")[1]) == 0.0

    def test_dataset_hash_mismatch_exit_3(self, tiny_run):
        root, _, _, data, _ = tiny_run
        cfg = root / "hash.cfg"
        cfg.write_text(TINY_TRAIN_CFG + "expected_dataset_hash = " + "0" * 64 + "\n")
        assert main(["train", "--config", str(cfg), "--data", str(data),
                     "--out", str(root / "z")]) == 3

    def test_resume_reproduces_bit_exact(self, tiny_run):
        root, _, _, data, run = tiny_run
        cfg4 = root / "t4.cfg"
        cfg4.write_text(TINY_TRAIN_CFG.replace("epochs = 2", "epochs = 4"))
        straight = root / "straight"
        assert main(["train", "--config", str(cfg4), "--data", str(data),
                     "--out", str(straight)]) == 0
        resumed = root / "resumed"
        assert main(["train", "--config", str(cfg4), "--data", str(data),
                     "--out", str(resumed),
                     "--from-checkpoint", str(run / "last.ckpt")]) == 0
        a, _, _ = load_checkpoint(straight / "last.ckpt")
        b, _, _ = load_checkpoint(resumed / "last.ckpt")
        assert np.array_equal(a.state_vector(), b.state_vector())

    def test_forward_identical_after_reload(self, tiny_run):
        _, _, _, _, run = tiny_run
        net1, _, _ = load_checkpoint(run / "best.ckpt")
        net2, _, _ = load_checkpoint(run / "best.ckpt")
        a = net1.forward([5000.0], [45.0])
        b = net2.forward([5000.0], [45.0])
        for x, y in zip(a, b):
            assert np.array_equal(x, y)


class TestRetrieve:
    def test_labeled_field_retrieval(self, tiny_run):
        root, _, _, data, run = tiny_run
        out = root / "tes"
        assert main(["retrieve", "--checkpoint", str(run / "best.ckpt"),
                     "--data", str(data / "field.lwirds"), "--out", str(out)]) == 0
        lines = (out / "tes.csv").read_text().strip().splitlines()
        assert len(lines) == 25  # header + 24 pixels
        header = lines[0].split(",")
        assert header[:3] == ["pixel", "criterion", "t_hat"]
        assert sum(h.startswith("mae_at_") for h in header) == 9  # 280:320:5 inclusive

    def test_t_grid_parsing(self, tiny_run):
        root, _, _, data, run = tiny_run
        out = root / "tes_grid"
        assert main(["retrieve", "--checkpoint", str(run / "best.ckpt"),
                     "--data", str(data / "field.lwirds"), "--out", str(out),
                     "--t-grid", "280:320:10"]) == 0
        header = (out / "tes.csv").read_text().splitlines()[0].split(",")
        assert sum(h.startswith("mae_at_") for h in header) == 5

    def test_criterion_flag(self, tiny_run):
        root, _, _, data, run = tiny_run
        out = root / "tes_norm"
        assert main(["retrieve", "--checkpoint", str(run / "best.ckpt"),
                     "--data", str(data / "field.lwirds"), "--out", str(out),
                     "--criterion", "mae+norm"]) == 0
        assert "mae_plus_norm_mae" in (out / "tes.csv").read_text()

    def test_unlabeled_needs_eps_bar(self, tiny_run, grid):
        root, sim_cfg, _, _, run = tiny_run
        unl_cfg = root / "unl.cfg"
        unl_cfg.write_text(TINY_SIM_CFG + "field.labeled_fraction = 0.0\n")
        data2 = root / "data_unlabeled"
        assert main(["simulate", "--config", str(unl_cfg), "--out", str(data2)]) == 0
        out = root / "tes_unl"
        assert main(["retrieve", "--checkpoint", str(run / "best.ckpt"),
                     "--data", str(data2 / "field.lwirds"), "--out", str(out)]) == 2
        assert main(["retrieve", "--checkpoint", str(run / "best.ckpt"),
                     "--data", str(data2 / "field.lwirds"), "--out", str(out),
                     "--force", "--eps-bar", "0.98"]) == 0

    def test_missing_data_exit_3(self, tiny_run):
        root, _, _, _, run = tiny_run
        assert main(["retrieve", "--checkpoint", str(run / "best.ckpt"),
                     "--data", str(root / "nowhere"), "--out", str(root / "t")]) == 3


class TestEvaluate:
    def test_bundle_files(self, tiny_run):
        root, _, _, data, run = tiny_run
        out = root / "eval"
        assert main(["evaluate", "--checkpoint", str(run / "best.ckpt"),
                     "--data", str(data), "--out", str(out)]) == 0
        for name in ("component_errors.csv", "residual_fields.csv", "purity.csv",
                     "ebt_noise.csv", "manifest.txt"):
            assert (out / name).exists()

    def test_component_errors_has_both_modes(self, tiny_run):
        root, *_ = tiny_run
        text = (root / "eval" / "component_errors.csv").read_text()
        assert ",true," in text and ",false," in text
        assert text.count("\n") == 11  # header + 5 components x 2 modes

    def test_residual_fields_cover_both_axes(self, tiny_run):
        root, *_ = tiny_run
        text = (root / "eval" / "residual_fields.csv").read_text()
        assert ",angle_deg," in text and ",range_m," in text

    def test_checkpoint_for_wrong_data_exit_3(self, tiny_run):
        root, _, _, data, run = tiny_run
        bogus = root / "empty"
        bogus.mkdir()
        assert main(["evaluate", "--checkpoint", str(run / "best.ckpt"),
                     "--data", str(bogus), "--out", str(root / "e2")]) == 3
