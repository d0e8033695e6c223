from dataclasses import replace

import numpy as np
import pytest

from osfuse.core.errors import ContractError, TrainingDivergedError
from osfuse.core.settings import FILTER_KINDS, SCAN_KINDS, RunConfig
from osfuse.core.tensor import Tensor
from osfuse.data.synthetic import split_dataset
from osfuse.experiment import ablation, toytrain
from osfuse.experiment.ablation import (
    module_combinations,
    module_label,
    run_ablation,
    run_alpha_sweep,
    run_area_sweep,
    run_module_ablation,
    run_sequence_ablation,
)
from osfuse.experiment.models import PATCH, accuracy, build_model, parameter_breakdown
from osfuse.experiment.optim import SGD
from osfuse.experiment.toytrain import (
    MARGIN_NOTE,
    ExperimentReport,
    ModelResult,
    control_config,
    prepare_batch,
    run_seeds,
    toy_fusion_experiment,
    train_model,
)


@pytest.fixture
def batches(tiny_config):
    train_set, test_set = split_dataset(tiny_config)
    return prepare_batch(train_set, tiny_config), prepare_batch(test_set, tiny_config)


@pytest.mark.parametrize("kind", ["optical", "sar", "fused"])
def test_untrained_models_sit_at_chance(kind, tiny_config, batches):
    _, test = batches
    model = build_model(kind, tiny_config)
    assert accuracy(model, test) == 50.0
    assert model.forward(test).shape == (len(test), 2)


def test_fused_parameter_breakdown_adds_up(tiny_config):
    cfg = replace(tiny_config, levels="3,4,5")
    parts = parameter_breakdown(build_model("fused", cfg))
    assert parts["total"] == sum(v for k, v in parts.items() if k != "total")
    assert parts["optical_trunk"] == parts["sar_trunk"] == 1 + PATCH * PATCH * 4 + 4
    assert parts["head"] == 2 * 4 * 3 * 2 + 2
    assert parts["afm"] == 3 * 2 * 4 * 4


def test_disabled_modules_hold_no_parameters(tiny_config):
    cfg = replace(tiny_config, use_fam=False, use_cmim=False, use_afm=False)
    model = build_model("fused", cfg)
    parts = parameter_breakdown(model)
    assert parts["cmim"] == parts["afm"] == 0
    assert parts["optical_trunk"] == PATCH * PATCH * 4 + 4
    assert not any("alpha" in name for name in model.parameters())


def test_fixed_alpha_is_not_a_parameter(tiny_config, batches):
    train, _ = batches
    cfg = replace(tiny_config, learn_alpha=False, alpha_init=0.5)
    model = build_model("optical", cfg)
    assert "trunk.alpha" not in model.parameters()
    sub = train.optical.subset(np.arange(2))
    expected = sub.images + 0.5 * sub.responses
    np.testing.assert_allclose(model.trunk.augment(sub).data, expected)


def test_fused_without_afm_averages_the_maps(tiny_config, batches):
    train, _ = batches
    cfg = replace(tiny_config, use_cmim=False, use_afm=False)
    model = build_model("fused", cfg)
    sub = train.subset(np.arange(2))
    optical = model.optical.pyramid(sub.optical, model.levels)[3]
    sar = model.sar.pyramid(sub.sar, model.levels)[3]
    np.testing.assert_allclose(model.fused_maps(sub)[3].data, 0.5 * (optical.data + sar.data))


def test_concat_sequence_model_trains(tiny_config, batches):
    train, test = batches
    cfg = replace(tiny_config, sequence_mode="concat", epochs=1)
    model = build_model("fused", cfg)
    assert model.cmim_cfg.sequence_mode == "concat"
    result = train_model("fused", cfg, train, test, stream=2)
    assert all(np.isfinite(result.losses))


def test_single_modality_breakdown(tiny_config):
    parts = parameter_breakdown(build_model("sar", tiny_config))
    assert set(parts) == {"sar_trunk", "head", "total"}
    with pytest.raises(ContractError):
        build_model("lidar", tiny_config)


def test_every_level_reaches_the_head(tiny_config, batches):
    train, _ = batches
    model = build_model("fused", replace(tiny_config, levels="3,4"))
    fused = model.fused_maps(train.subset(np.arange(2)))
    assert {level: m.shape for level, m in fused.items()} == {3: (2, 4, 4, 4), 4: (2, 2, 2, 4)}


def test_training_is_deterministic(tiny_config, batches):
    train, test = batches
    first = train_model("fused", tiny_config, train, test, stream=2)
    second = train_model("fused", tiny_config, train, test, stream=2)
    assert first.losses == second.losses
    assert first.test_curve == second.test_curve
    assert len(first.losses) == tiny_config.epochs
    assert all(np.isfinite(first.losses))


def test_first_step_only_moves_the_head(tiny_config, batches):
    train, test = batches
    model = build_model("fused", tiny_config, stream=2)
    before = {k: v.data.copy() for k, v in model.parameters().items()}
    optimizer = SGD(model.parameters(), lr=0.05, weight_decay=0.0)
    loss = toytrain.bce_with_logits(model.forward(train), train.one_hot())
    loss.backward()
    optimizer.step()
    changed = {k for k, v in model.parameters().items() if not np.array_equal(v.data, before[k])}
    assert "head.w" in changed
    # with a zero head nothing upstream receives gradient on the first step
    assert "optical.w_embed" not in changed


def test_divergence_is_reported(tiny_config, batches, monkeypatch):
    train, test = batches
    monkeypatch.setattr(toytrain, "bce_with_logits", lambda z, y: z.sum() * float("nan"))
    with pytest.raises(TrainingDivergedError, match="filter=grad"):
        train_model("optical", tiny_config, train, test)


def test_sgd_update_rule():
    w = Tensor(np.ones((2, 2)), requires_grad=True)
    b = Tensor(np.ones(2), requires_grad=True)
    opt = SGD({"w": w, "b": b}, lr=0.1, momentum=0.5, weight_decay=0.1)
    assert opt.decays("w") and not opt.decays("b")
    w.grad, b.grad = np.ones((2, 2)), np.ones(2)
    norm = opt.step()
    assert norm == pytest.approx(np.sqrt(6.0))
    np.testing.assert_allclose(w.data, 1.0 - 0.1 * 1.1)
    np.testing.assert_allclose(b.data, 0.9)
    b.grad = np.ones(2)
    opt.step()
    np.testing.assert_allclose(b.data, 0.9 - 0.1 * (0.5 * 1.0 + 1.0))


@pytest.mark.parametrize("kwargs", [{"lr": 0.0}, {"momentum": 1.0}, {"momentum": -0.1}])
def test_sgd_validation(kwargs):
    with pytest.raises(ContractError):
        SGD({}, **kwargs)


def test_report_margin():
    results = {k: ModelResult(k, acc) for k, acc in (("optical", 70.0), ("sar", 75.0), ("fused", 82.5))}
    report = ExperimentReport(config={}, results=results)
    assert report.best_single == 75.0
    assert report.margin == 7.5
    assert report.to_dict()["note"] == MARGIN_NOTE
    assert "+7.50 points" in report.format_table()
    assert ExperimentReport(config={}, results={"fused": results["fused"]}).margin is None


def test_control_removes_corruption(tiny_config):
    cfg = control_config(tiny_config)
    assert cfg.occlusion_rate == 0.0 and cfg.speckle is False
    assert cfg.seed == tiny_config.seed


def test_control_run_returns_finite_report(tiny_config):
    report = toy_fusion_experiment(control_config(replace(tiny_config, epochs=1)))
    assert set(report.results) == {"optical", "sar", "fused"}
    for result in report.results.values():
        assert np.isfinite(result.accuracy)
        assert all(np.isfinite(result.losses))
    assert report.margin is not None and np.isfinite(report.margin)


def test_small_experiment_runs_end_to_end(tiny_config):
    report = toy_fusion_experiment(tiny_config, kinds=("sar", "fused"))
    assert set(report.results) == {"sar", "fused"}
    assert 0.0 <= report.results["fused"].accuracy <= 100.0
    assert report.margin == report.results["fused"].accuracy - report.results["sar"].accuracy


def test_seed_summary(tiny_config):
    summary = run_seeds(replace(tiny_config, epochs=1), [0, 1])
    assert summary.seeds == [0, 1]
    assert len(summary.margins) == 2
    assert summary.to_dict()["mean_margin"] == pytest.approx(np.mean(summary.margins))


def test_small_ablation(tiny_config):
    report = run_ablation(replace(tiny_config, epochs=1), filter_kinds=("grad", "canny"),
                          scan_kinds=("zigzag",))
    assert list(report.by_axis("filter")) == ["grad", "canny"]
    assert list(report.by_axis("scan")) == ["zigzag"]
    assert all(np.isfinite(row.final_loss) for row in report.rows)


def test_small_area_sweep(tiny_config):
    report = run_area_sweep(replace(tiny_config, epochs=1), ks=(1, 4))
    assert list(report.by_axis("area_k")) == ["1", "4"]


def test_module_combinations_cover_every_switch():
    combos = module_combinations()
    assert len(set(combos)) == 8
    assert module_label(combos[0]) == "fam+cmim+afm"
    assert module_label(combos[-1]) == "none"
    assert module_label((True, False, True)) == "fam+afm"


def test_small_module_ablation(tiny_config):
    report = run_module_ablation(replace(tiny_config, epochs=1))
    values = report.by_axis("modules")
    assert len(values) == 8
    assert {"fam+cmim+afm", "cmim", "none"} <= set(values)
    assert all(np.isfinite(row.final_loss) for row in report.rows)


def test_small_sequence_ablation(tiny_config):
    report = run_sequence_ablation(replace(tiny_config, epochs=1))
    assert list(report.by_axis("sequence")) == ["interleave", "concat"]
    assert all(np.isfinite(row.final_loss) for row in report.rows)


def test_small_alpha_sweep(tiny_config):
    report = run_alpha_sweep(replace(tiny_config, epochs=1), alphas=(0.0, 0.5, 1.0))
    assert list(report.by_axis("alpha")) == ["0", "0.5", "1"]
    assert all(np.isfinite(row.final_loss) for row in report.rows)


def test_sweep_splits_the_dataset_once(tiny_config, monkeypatch):
    calls = []

    def counting_split(cfg):
        calls.append(cfg.seed)
        return split_dataset(cfg)

    monkeypatch.setattr(ablation, "split_dataset", counting_split)
    run_ablation(replace(tiny_config, epochs=1), filter_kinds=("grad", "canny"), scan_kinds=())
    assert calls == [tiny_config.seed]


# ------------------------------------------------------------ full-size runs
@pytest.mark.slow
def test_fusion_beats_best_single_modality():
    summary = run_seeds(RunConfig(), [0, 1, 2, 3, 4])
    assert summary.mean_margin >= 5.0


@pytest.mark.slow
def test_no_margin_without_complementary_corruption():
    summary = run_seeds(control_config(RunConfig()), [0, 1, 2, 3, 4])
    assert abs(summary.mean_margin) <= 3.0


@pytest.mark.slow
def test_full_ablation_trains_every_variant():
    report = run_ablation(RunConfig())
    assert set(report.by_axis("filter")) == set(FILTER_KINDS)
    assert set(report.by_axis("scan")) == set(SCAN_KINDS)
    assert all(np.isfinite(row.final_loss) for row in report.rows)
