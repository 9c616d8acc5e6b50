import math

import numpy as np
import pytest

import taskarith as ta


def test_forward_hand_example():
    p = ta.ModelParams()
    p.W = np.zeros((2, 2))
    p.V = np.array([[1.0, 0.0], [-1.0, 0.0]])
    r = 1 / math.sqrt(2)
    p.A = np.array([[r, -r], [r, -r]])
    X = np.array([[1.0, 1.0], [0.0, 0.0]])
    assert ta.forward(p, X) == pytest.approx(r, rel=1e-15)


def test_train_extract_merge():
    spec = ta.make_task_spec(8, 4, 6, 0.4, 0.2, 3)
    p0 = ta.init_params(8, 16, 6, 0.01, 2)
    cfg = ta.TrainConfig()
    cfg.m, cfg.xi, cfg.batch, cfg.iterations, cfg.eta, cfg.seed = 16, 0.01, 16, 30, 2.0, 4
    res = ta.sgd_finetune(p0, spec, cfg)
    assert len(res.batch_loss) == 30
    tv = ta.extract(res.params, p0, ta.Provenance("psi0", "psi1", "T1"))
    merged = ta.merge(p0, [(tv, 1.0)])
    np.testing.assert_allclose(merged.V, res.params.V, atol=1e-15)
    assert ta.eval_error(merged, spec, 200, 9).hinge < ta.eval_error(p0, spec, 200, 9).hinge
    assert ta.prune_rows(tv, 0.0).kept_fraction == 1.0


def test_errors_map_to_python_types():
    with pytest.raises(ta.ParameterError):
        ta.init_params(4, 16, 3, 0.3, 1)
    with pytest.raises(ta.NoSolutionError):
        ta.closed_form_lambdas([-0.5, -0.5], 0.1)
    assert issubclass(ta.ConfigError, ta.TaskArithError)


def test_analysis():
    cfg = ta.AnalysisConfig.theory(0.05, 0.5)
    assert ta.mtl_lambda_region(0.0, cfg).contains(1.4)
    assert ta.unlearn_lambda_region(0.0, cfg).kind == "half-line"
    cf = ta.closed_form_lambdas([0.8, -0.6], 0.1, True)
    assert cf.sum_lambda_gamma_sq == pytest.approx(1.1, abs=1e-12)
    assert ta.ood_condition_check([0.8, -0.6], cf.lambdas, ta.AnalysisConfig.theory(0.01, 0.1)).verdict


def test_run_sweep_config():
    cfg = {
        "schema_version": 1,
        "kind": "sweep",
        "seed": 5,
        "task": {"d": 10, "M": 3, "P": 6},
        "train": {"iterations": 20, "m": 16, "batch": 8, "eta": 2.0},
        "grid": {"lambda": {"lo": -1, "hi": 1, "step": 1}},
        "eval_samples": 50,
        "diagnostics": {"samples": 10},
    }
    report = ta.run(cfg)
    assert report["kind"] == "sweep"
    assert [r["lambda"] for r in report["rows"]] == [-1.0, 0.0, 1.0]
    assert ta.run(cfg, "csv").startswith("lambda,err1_hinge")
    with pytest.raises(ta.ConfigError):
        ta.run({**cfg, "sead": 1})
