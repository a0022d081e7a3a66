"""Desk-scale experiment runners and their run reports.

Four experiments:

* ``run_hyperclean`` — per-example weights on a corrupted training set,
  sparsified under a box/L1 budget, then retraining on the kept examples.
* ``run_mtl`` — learning a task-interaction matrix coupling the rows of
  a linear multiclass model, against single-task and uniform baselines.
* ``run_rtho`` — real-time hyperparameter tuning of (eta, mu) during one
  continuous training run, optionally head-to-head against random search
  on an equal inner-step budget.
* ``run_bench`` — wall-time scaling of both engines in the number of
  hyperparameters, and tape growth in the horizon.

Every runner returns a RunReport embedding the full config and seeds;
rerunning the same config reproduces the report's digest bit for bit
(timings are excluded from the digest).
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, config_as_dict, config_to_text
from .data_io import corrupt_labels, ingest_idx, write_curves_csv, write_jsonl
from .datasets import (Dataset, MinibatchSchedule, blob_task,
                       clustered_task_data, full_batch_schedule)
from .driver import (LearningRateDecayedToZero, MaxHyperIters, batch_ho_loop,
                     stream_ho_loop)
from .dynamics import GradientDescent, Momentum
from .layouts import VectorLayout
from .objectives import DatasetValidation, MultitaskLinear, WeightedSoftmax
from .outer import (BoxL1, Constraints, Exponential, MTLCone, NonNeg,
                    SearchSpace, Uniform, UnitInterval, random_search)

# ---------------------------------------------------------------------------
# Run reports


@dataclass
class RunReport:
    experiment: str
    config: dict
    records: list
    metrics: dict
    timings: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)

    def records_jsonable(self, include_timing=True):
        return [r.to_jsonable(include_timing=include_timing)
                for r in self.records]

    def digest(self) -> str:
        """Hash of everything that must reproduce bitwise across reruns."""
        # where the artifacts land has no bearing on what was computed
        config = {k: v for k, v in self.config.items() if k != "out_dir"}
        payload = {
            "experiment": self.experiment,
            "config": config,
            "records": self.records_jsonable(include_timing=False),
            "metrics": self.metrics,
        }
        blob = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def write_report(report: RunReport, out_dir):
    """Emit config, records, metrics, and curves under out_dir/<experiment>."""
    base = Path(out_dir) / report.experiment
    base.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig(**report.config)
    (base / "config.txt").write_text(config_to_text(cfg))
    write_jsonl(base / "records.jsonl", report.records_jsonable())
    payload = {"metrics": report.metrics, "timings": report.timings,
               "digest": report.digest()}
    (base / "metrics.json").write_text(json.dumps(payload, indent=2) + "\n")
    for name, (header, rows) in report.curves.items():
        write_curves_csv(base / f"{name}.csv", header, rows)
    return base


# ---------------------------------------------------------------------------
# Shared pieces


def _plain_softmax_objective(ds, schedule=None):
    return WeightedSoftmax(ds, hyper_layout=None, schedule=schedule,
                           weight_segment=None)


def _train_softmax(ds, n_steps, lr, schedule=None, w0=None):
    """Uniform-weight softmax training; returns the final weight vector."""
    obj = _plain_softmax_objective(ds, schedule)
    dyn = GradientDescent(obj, eta=lr)
    s = dyn.init_state(np.zeros(obj.n_params) if w0 is None else w0)
    lam = np.zeros(0)
    for t in range(1, n_steps + 1):
        s = dyn.step(s, lam, t)
    return s


def _accuracy_pct(ds, w):
    return 100.0 * DatasetValidation(ds).accuracy(w)


def _f1(n_true_pos, n_pred_pos, n_actual_pos):
    if n_pred_pos == 0 or n_actual_pos == 0:
        return 0.0
    precision = n_true_pos / n_pred_pos
    recall = n_true_pos / n_actual_pos
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# Hyper-cleaning


def _load_clean_data(cfg: ExperimentConfig):
    if cfg.train_images is not None:
        pool = ingest_idx(cfg.train_images, cfg.train_labels, split="train")
        train = pool.subset(np.arange(cfg.n_train), split="train")
        val = pool.subset(np.arange(cfg.n_train, cfg.n_train + cfg.n_val),
                          split="validation")
        if cfg.test_images is not None:
            test = ingest_idx(cfg.test_images, cfg.test_labels, split="test")
        else:
            test = pool.subset(np.arange(cfg.n_train + cfg.n_val, pool.n),
                               split="test")
        return train, val, test
    # Mirrored means keep the synthetic task linearly separable for every
    # seed; cleaning only identifies flipped labels when the classes are.
    return blob_task(cfg.seed, cfg.n_train, cfg.n_val, cfg.n_test,
                     n_classes=cfg.n_classes, n_features=cfg.n_features,
                     antipodal=True)


def run_hyperclean(cfg: ExperimentConfig) -> RunReport:
    """Learn per-example weights, discard zero-weight examples, retrain."""
    cfg.validate()
    train, val, test = _load_clean_data(cfg)
    corrupted_train, corrupted_idx = corrupt_labels(train, cfg.corruption,
                                                    cfg.seed)
    corrupted_set = set(int(i) for i in corrupted_idx)
    n = corrupted_train.n

    layout = VectorLayout([("weights", n)])
    schedule = (full_batch_schedule(n) if cfg.batch_size is None
                else MinibatchSchedule(n=n, batch_size=cfg.batch_size,
                                       seed=cfg.seed))
    obj = WeightedSoftmax(corrupted_train, hyper_layout=layout,
                          schedule=schedule, weight_segment="weights")
    dyn = GradientDescent(obj, eta=cfg.inner_lr)
    e_val = DatasetValidation(val)
    constraints = Constraints(layout, {"weights": BoxL1(0.0, 1.0, cfg.radius)})
    s0 = dyn.init_state(np.zeros(obj.n_params))

    def cleaning_extras(lam, _result):
        discarded = np.nonzero(lam == 0.0)[0]
        tp = sum(1 for i in discarded if int(i) in corrupted_set)
        fp = len(discarded) - tp
        return {"discarded": int(len(discarded)), "tp": int(tp), "fp": int(fp),
                "f1": _f1(tp, len(discarded), len(corrupted_set))}

    lam_final, records = batch_ho_loop(
        dyn, e_val, s0, np.ones(n), constraints, cfg.inner_steps,
        stop=MaxHyperIters(cfg.hyper_iters), engine=cfg.engine,
        lr=cfg.hyper_lr, record_extras=cleaning_extras,
    )
    for r in records:
        if not constraints.contains(r.lam):
            raise AssertionError(f"infeasible weights recorded at "
                                 f"hyper-iteration {r.index}")

    kept = np.nonzero(lam_final > 0.0)[0]
    discarded = np.nonzero(lam_final == 0.0)[0]
    tp = sum(1 for i in discarded if int(i) in corrupted_set)
    f1 = _f1(tp, len(discarded), len(corrupted_set))

    # retrain on kept-training + validation pool
    pooled = Dataset(
        features=np.vstack([corrupted_train.features[kept], val.features]),
        labels=np.concatenate([corrupted_train.labels[kept], val.labels]),
        split="train", n_classes=corrupted_train.n_classes,
    )
    w_clean = _train_softmax(pooled, cfg.inner_steps, cfg.inner_lr)
    w_baseline = _train_softmax(corrupted_train, cfg.inner_steps, cfg.inner_lr)
    w_oracle = _train_softmax(train, cfg.inner_steps, cfg.inner_lr)

    metrics = {
        "seed": cfg.seed,
        "n_corrupted": len(corrupted_set),
        "kept": int(len(kept)),
        "discarded": int(len(discarded)),
        "tp": int(tp),
        "fp": int(len(discarded) - tp),
        "f1": f1,
        "test_accuracy": _accuracy_pct(test, w_clean),
        "baseline_accuracy": _accuracy_pct(test, w_baseline),
        "oracle_accuracy": _accuracy_pct(test, w_oracle),
        "weight_sum": float(lam_final.sum()),
    }
    curves = {
        "cleaning": (
            ["iter", "response", "grad_norm", "discarded", "tp", "fp", "f1"],
            [[r.index, r.response, r.grad_norm, r.extras["discarded"],
              r.extras["tp"], r.extras["fp"], r.extras["f1"]] for r in records],
        )
    }
    return RunReport("clean", config_as_dict(cfg), records, metrics,
                     curves=curves)


# ---------------------------------------------------------------------------
# Multitask interaction learning

_RHO_GRID = (0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0)
_RHO_INIT = 0.1


def _mtl_data(cfg, seed):
    per_tr = max(1, cfg.n_train // cfg.n_classes)
    per_val = max(1, cfg.n_val // cfg.n_classes)
    per_te = max(1, cfg.n_test // cfg.n_classes)
    # Keep prototype pairs ~1.5 apart in feature space no matter the
    # dimension (the spread is per-coordinate), and keep the clusters
    # moderately separated.  With a handful of examples per class the
    # per-class estimates are then noisy enough that relational
    # shrinkage has real headroom over plain per-task ridge.
    spread = 1.5 / np.sqrt(2.0 * cfg.n_features)
    return clustered_task_data(seed, cfg.n_classes, cfg.n_clusters,
                               cfg.n_features, per_tr, per_val, per_te,
                               cluster_separation=2.0, class_spread=spread)


def _train_mtl(train, n_steps, lr, lam, layout=None, **obj_kwargs):
    obj = MultitaskLinear(train, hyper_layout=layout, **obj_kwargs)
    dyn = GradientDescent(obj, eta=lr)
    s = dyn.init_state(np.zeros(obj.n_params))
    for t in range(1, n_steps + 1):
        s = dyn.step(s, lam, t)
    return s


def _stl_grid(train, val, test, cfg):
    """Per-task ridge sweep: shared value first, then one greedy pass."""
    k = train.n_classes

    def fit_score(rho_vec):
        w = _train_mtl(train, cfg.inner_steps, cfg.inner_lr, np.zeros(0),
                       coupling="none", coupling_segment=None,
                       rho_segment=None, fixed_rho=rho_vec, per_task_rho=True)
        return w, DatasetValidation(val).value(w)

    best_shared, best_score = None, np.inf
    for rho in _RHO_GRID:
        _, score = fit_score(np.full(k, rho))
        if score < best_score:
            best_shared, best_score = rho, score
    rho_vec = np.full(k, best_shared)
    for task in range(k):
        for rho in _RHO_GRID:
            trial = rho_vec.copy()
            trial[task] = rho
            _, score = fit_score(trial)
            if score < best_score:
                rho_vec, best_score = trial, score
    w, _ = fit_score(rho_vec)
    return _accuracy_pct(test, w), rho_vec


def _coupled_run(train, val, test, cfg, mode, radius=None):
    """Hyper-optimize a coupled model; returns (test accuracy, final lam, records)."""
    k = train.n_classes
    if mode == "uniform":
        layout = VectorLayout([("coupling", 1), ("rho", 1)])
        rules = {"coupling": NonNeg(), "rho": NonNeg()}
        lam0 = layout.pack(coupling=0.0, rho=_RHO_INIT)
        obj_kwargs = dict(coupling="uniform", per_task_rho=False)
    else:
        layout = VectorLayout([("coupling", k * k), ("rho", k)])
        rules = {"coupling": MTLCone(radius), "rho": NonNeg()}
        lam0 = layout.pack(coupling=np.zeros(k * k), rho=np.full(k, _RHO_INIT))
        obj_kwargs = dict(coupling="full", per_task_rho=True)
    obj = MultitaskLinear(train, hyper_layout=layout, **obj_kwargs)
    dyn = GradientDescent(obj, eta=cfg.inner_lr)
    constraints = Constraints(layout, rules)
    e_val = DatasetValidation(val)
    s0 = dyn.init_state(np.zeros(obj.n_params))
    lam, records = batch_ho_loop(
        dyn, e_val, s0, lam0, constraints, cfg.inner_steps,
        stop=MaxHyperIters(cfg.hyper_iters), engine=cfg.engine,
        lr=cfg.hyper_lr,
    )
    for r in records:
        if not constraints.contains(r.lam):
            raise AssertionError(f"infeasible hypers at hyper-iteration {r.index}")
    w = _train_mtl(train, cfg.inner_steps, cfg.inner_lr, lam, layout=layout,
                   **obj_kwargs)
    coupling = obj._coupling_matrix(lam)
    return _accuracy_pct(test, w), lam, records, coupling


def run_mtl(cfg: ExperimentConfig) -> RunReport:
    """STL / NMTL / HMTL / HMTL-S comparison over seeded splits."""
    cfg.validate()
    if cfg.n_classes < 2:
        raise ValueError("multitask comparison needs at least 2 classes")
    methods = {"stl": [], "nmtl": [], "hmtl": [], "hmtl_s": []}
    all_records = []
    couplings = {"hmtl": [], "hmtl_s": []}
    for rep in range(cfg.n_seeds):
        seed = cfg.seed + rep
        train, val, test, _ = _mtl_data(cfg, seed)

        acc_stl, _ = _stl_grid(train, val, test, cfg)
        methods["stl"].append(acc_stl)

        acc_nmtl, _, recs, _ = _coupled_run(train, val, test, cfg, "uniform")
        methods["nmtl"].append(acc_nmtl)
        _tag_records(recs, all_records, seed=seed, method="nmtl")

        acc_hmtl, _, recs, c_mat = _coupled_run(train, val, test, cfg, "full")
        methods["hmtl"].append(acc_hmtl)
        _tag_records(recs, all_records, seed=seed, method="hmtl")
        couplings["hmtl"].append(c_mat)

        acc_s, _, recs, c_mat = _coupled_run(train, val, test, cfg, "full",
                                             radius=cfg.radius)
        methods["hmtl_s"].append(acc_s)
        _tag_records(recs, all_records, seed=seed, method="hmtl_s")
        couplings["hmtl_s"].append(c_mat)

    metrics = {"seeds": [cfg.seed + r for r in range(cfg.n_seeds)]}
    for name, accs in methods.items():
        metrics[name] = {"mean": float(np.mean(accs)),
                         "std": float(np.std(accs)),
                         "per_seed": [float(a) for a in accs]}
    metrics["margin"] = metrics["hmtl_s"]["mean"] - metrics["stl"]["mean"]
    metrics["coupling_matrix"] = [[float(v) for v in row]
                                  for row in couplings["hmtl_s"][-1]]
    metrics["coupling_matrices"] = {
        name: [[[float(v) for v in row] for row in c] for c in mats]
        for name, mats in couplings.items()
    }
    curves = {
        "accuracy": (
            ["seed", "stl", "nmtl", "hmtl", "hmtl_s"],
            [[cfg.seed + r] + [methods[m][r] for m in
                               ("stl", "nmtl", "hmtl", "hmtl_s")]
             for r in range(cfg.n_seeds)],
        )
    }
    return RunReport("mtl", config_as_dict(cfg), all_records, metrics,
                     curves=curves)


def _tag_records(records, sink, **tags):
    for r in records:
        r.extras = {**tags, **r.extras}
        sink.append(r)


# ---------------------------------------------------------------------------
# Real-time tuning and the random-search head-to-head


def _rtho_problem(cfg, seed):
    train, val, test = blob_task(seed, cfg.n_train, cfg.n_val, cfg.n_test,
                                 n_classes=cfg.n_classes,
                                 n_features=cfg.n_features)
    layout = VectorLayout([("eta", 1), ("mu", 1)])
    schedule = MinibatchSchedule(n=train.n, batch_size=cfg.batch_size,
                                 seed=seed)
    obj = WeightedSoftmax(train, hyper_layout=layout, schedule=schedule,
                          weight_segment=None)
    dyn = Momentum(obj, eta="eta", mu="mu")
    e_val = DatasetValidation(val, subset_size=cfg.val_subset,
                              subset_seed=seed)
    constraints = Constraints(layout, {"eta": NonNeg(), "mu": UnitInterval()})
    return train, val, test, layout, dyn, e_val, constraints


def _run_rtho_once(cfg, seed):
    train, val, test, layout, dyn, e_val, constraints = _rtho_problem(cfg, seed)
    s0 = dyn.init_state(np.zeros(dyn.objective.n_params))
    lam0 = layout.pack(eta=0.0, mu=0.0)  # null teacher: hypers start dead
    e_train = DatasetValidation(train)

    def stream_extras(lam, emission):
        w = dyn.weights_of(emission.state)
        return {"eta": float(layout.get(lam, "eta")[0]),
                "mu": float(layout.get(lam, "mu")[0]),
                "val_accuracy": 100.0 * e_val.accuracy(w),
                "train_accuracy": 100.0 * e_train.accuracy(w)}

    stop = [MaxHyperIters(cfg.hyper_iters),
            LearningRateDecayedToZero(layout, "eta")]
    lam, records = stream_ho_loop(
        dyn, e_val, s0, lam0, constraints, cfg.delta, stop,
        lr=cfg.hyper_lr, record_extras=stream_extras,
    )
    best_val = min(r.response for r in records)
    final = records[-1]
    return {
        "lam": lam, "records": records, "best_val_error": best_val,
        "final_val_error": final.response,
        "final_val_accuracy": final.extras["val_accuracy"],
        "final_eta": final.extras["eta"], "final_mu": final.extras["mu"],
        "total_steps": final.step, "test": test, "val": val, "train": train,
    }


def _random_search_baseline(cfg, seed, total_steps):
    """Equal-inner-step-budget random search over (eta, mu)."""
    train, val, _test, layout, _dyn, e_val, _constraints = _rtho_problem(cfg, seed)
    steps_per_trial = max(1, cfg.inner_steps)
    n_trials = max(1, total_steps // steps_per_trial)
    space = SearchSpace(layout, {"eta": Exponential(0.1),
                                 "mu": Uniform(0.0, 1.0)})
    schedule = MinibatchSchedule(n=train.n, batch_size=cfg.batch_size,
                                 seed=seed)
    obj = WeightedSoftmax(train, hyper_layout=layout, schedule=schedule,
                          weight_segment=None)
    dyn = Momentum(obj, eta="eta", mu="mu")

    def evaluate(lam):
        s = dyn.init_state(np.zeros(obj.n_params))
        for t in range(1, steps_per_trial + 1):
            s = dyn.step(s, lam, t)
        return e_val.value(dyn.weights_of(s))

    result = random_search(space, evaluate, n_trials, seed)
    return result, n_trials, steps_per_trial


def run_rtho(cfg: ExperimentConfig) -> RunReport:
    """Null-teacher real-time tuning; multi-seed configs add the RS duel."""
    cfg.validate()
    if cfg.n_seeds == 1:
        run = _run_rtho_once(cfg, cfg.seed)
        records = run["records"]
        metrics = {
            "seed": cfg.seed,
            "best_val_error": run["best_val_error"],
            "final_val_error": run["final_val_error"],
            "final_val_accuracy": run["final_val_accuracy"],
            "final_eta": run["final_eta"],
            "final_mu": run["final_mu"],
            "total_steps": run["total_steps"],
        }
        curves = {
            "stream": (
                ["step", "response", "grad_norm", "eta", "mu",
                 "train_accuracy", "val_accuracy"],
                [[r.step, r.response, r.grad_norm, r.extras["eta"],
                  r.extras["mu"], r.extras["train_accuracy"],
                  r.extras["val_accuracy"]] for r in records],
            )
        }
        return RunReport("rtho", config_as_dict(cfg), records, metrics,
                         curves=curves)

    # head-to-head across seeds on an equal inner-step budget
    all_records = []
    duels = []
    for rep in range(cfg.n_seeds):
        seed = cfg.seed + rep
        run = _run_rtho_once(cfg, seed)
        _tag_records(run["records"], all_records, seed=seed, method="rtho")
        rs, n_trials, steps_per_trial = _random_search_baseline(
            cfg, seed, run["total_steps"])
        duels.append({
            "seed": seed,
            "rtho_val_error": run["best_val_error"],
            "rs_val_error": rs.best.score,
            "rs_trials": n_trials,
            "rs_steps_per_trial": steps_per_trial,
            "rtho_steps": run["total_steps"],
            "rtho_wins": bool(run["best_val_error"] <= rs.best.score),
        })
    wins = sum(1 for d in duels if d["rtho_wins"])
    metrics = {"duels": duels, "rtho_wins": wins, "n_seeds": cfg.n_seeds}
    curves = {
        "head_to_head": (
            ["seed", "rtho_val_error", "rs_val_error", "rtho_wins"],
            [[d["seed"], d["rtho_val_error"], d["rs_val_error"],
              int(d["rtho_wins"])] for d in duels],
        )
    }
    return RunReport("rtho", config_as_dict(cfg), all_records, metrics,
                     curves=curves)


def run_randsearch(cfg: ExperimentConfig) -> RunReport:
    """Standalone random-search baseline on the streaming task."""
    cfg.validate()
    result, n_trials, steps_per_trial = _random_search_baseline(
        cfg, cfg.seed, cfg.budget * cfg.inner_steps)
    metrics = {
        "seed": cfg.seed,
        "trials": n_trials,
        "steps_per_trial": steps_per_trial,
        "best_score": result.best.score,
        "best_lam": [float(v) for v in result.best.lam],
        "failed_trials": sum(1 for tr in result.trials if tr.failed),
    }
    curves = {
        "trials": (
            ["trial", "score", "eta", "mu", "failed"],
            [[tr.index, tr.score, float(tr.lam[0]), float(tr.lam[1]),
              int(tr.failed)] for tr in result.trials],
        )
    }
    return RunReport("randsearch", config_as_dict(cfg), [], metrics,
                     curves=curves)


# ---------------------------------------------------------------------------
# Complexity benchmark


_BENCH_CLASSES = 10
_BENCH_FEATURES = 100
_BENCH_BATCH = 4
_BENCH_TIMING_STEPS = 60
_BENCH_REPEATS = 3


def _bench_instance(cfg, m):
    """Weighted-softmax instance with exactly m example-weight hypers."""
    n_val = 64
    train, val, _ = blob_task(cfg.seed, max(m, 1), n_val, 1,
                              n_classes=_BENCH_CLASSES,
                              n_features=_BENCH_FEATURES)
    layout = VectorLayout([("weights", m)])
    schedule = MinibatchSchedule(n=m, batch_size=min(_BENCH_BATCH, m),
                                 seed=cfg.seed)
    obj = WeightedSoftmax(train, hyper_layout=layout, schedule=schedule,
                          weight_segment="weights")
    dyn = GradientDescent(obj, eta=0.05)
    e_val = DatasetValidation(val)
    s0 = dyn.init_state(np.zeros(obj.n_params))
    lam = np.full(m, 1.0)
    return dyn, e_val, s0, lam


def _best_time(fn, repeats=_BENCH_REPEATS):
    best = np.inf
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def run_bench(cfg: ExperimentConfig) -> RunReport:
    """Measure per-hypergradient wall time vs m and tape growth vs T."""
    from .engines import forward_hg, reverse_hg  # local to keep import cheap

    cfg.validate()
    m_values = cfg.int_list("bench_m")
    step_values = cfg.int_list("bench_steps")

    forward_rows, reverse_rows = [], []
    for m in m_values:
        dyn, e_val, s0, lam = _bench_instance(cfg, m)
        forward_hg(dyn, e_val, s0, lam, 2)  # warm caches before timing
        fwd = _best_time(lambda: forward_hg(dyn, e_val, s0, lam,
                                            _BENCH_TIMING_STEPS))
        rev = _best_time(lambda: reverse_hg(dyn, e_val, s0, lam,
                                            _BENCH_TIMING_STEPS))
        forward_rows.append([m, fwd])
        reverse_rows.append([m, rev])

    tape_rows = []
    dyn, e_val, s0, lam = _bench_instance(cfg, 10)
    for n_steps in step_values:
        result = reverse_hg(dyn, e_val, s0, lam, n_steps)
        tape_rows.append([n_steps, len(result.tape), result.tape.nbytes()])

    fwd_by_m = {int(m): s for m, s in forward_rows}
    rev_by_m = {int(m): s for m, s in reverse_rows}
    timings = {
        "forward_seconds": fwd_by_m,
        "reverse_seconds": rev_by_m,
        "timing_steps": _BENCH_TIMING_STEPS,
    }
    if 10 in fwd_by_m and 100 in fwd_by_m:
        timings["forward_ratio_100_10"] = fwd_by_m[100] / fwd_by_m[10]
        timings["reverse_ratio_100_10"] = rev_by_m[100] / rev_by_m[10]
    metrics = {
        "state_dim": _BENCH_CLASSES * (_BENCH_FEATURES + 1),
        "tape": {str(row[0]): {"states": row[1], "bytes": row[2]}
                 for row in tape_rows},
        "m_values": m_values,
        "step_values": step_values,
    }
    curves = {
        "forward_time": (["m", "seconds"], forward_rows),
        "reverse_time": (["m", "seconds"], reverse_rows),
        "tape": (["steps", "states", "bytes"], tape_rows),
    }
    return RunReport("bench", config_as_dict(cfg), [], metrics,
                     timings=timings, curves=curves)
