"""Batch pipeline front-end: train -> extract -> stability -> report.

Artifacts live under <out_dir>/<problem>/seed<S>/ as plain text/CSV/DOT so
runs can be diffed; reruns with the same config are byte-identical.  Exit
codes distinguish the interesting failure modes so shell pipelines can
branch on them.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import automata, extract, langdata, rnn, stability
from .config import (
    ROLE_LONG_STRINGS,
    ROLE_MODEL,
    ROLE_PERTURB,
    ROLE_TRAIN_STREAM,
    ROLE_VAL_STREAM,
    ExperimentConfig,
    derive_seed,
    load_config,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2
EXIT_NOT_CLUSTERABLE = 3
EXIT_NONDETERMINISTIC = 4
EXIT_INEQUIVALENT = 5

OUT_ENV = "RNN2DFA_OUT"


def run_dir(cfg: ExperimentConfig, member: int = 0) -> Path:
    root = Path(os.environ.get(OUT_ENV, ".")) / cfg.out_dir
    name = f"seed{cfg.seed}" if member == 0 else f"seed{cfg.seed}_m{member}"
    return root / cfg.problem / name


def make_streams(cfg: ExperimentConfig):
    gt = langdata.make_problem(cfg.problem)
    train_stream = langdata.generate_stream(
        gt, cfg.train_symbols, cfg.max_segment,
        derive_seed(cfg.seed, ROLE_TRAIN_STREAM), cfg.positive_frac,
    )
    val_stream = langdata.generate_stream(
        gt, cfg.val_symbols, cfg.max_segment, derive_seed(cfg.seed, ROLE_VAL_STREAM)
    )
    return gt, train_stream, val_stream


def rnn_config(cfg: ExperimentConfig, member: int = 0) -> rnn.RnnConfig:
    return rnn.RnnConfig(
        n_hidden=cfg.n_hidden,
        nu=cfg.nu,
        l1=cfg.l1,
        lr=cfg.lr,
        clip=cfg.clip,
        bptt_steps=cfg.bptt_steps,
        epochs=cfg.epochs,
        min_epochs=cfg.min_epochs,
        noise_ramp=cfg.noise_ramp,
        ramp_end=cfg.ramp_end,
        rng_seed=derive_seed(cfg.seed, ROLE_MODEL + member),
    )


def cmd_train(cfg: ExperimentConfig, member: int = 0, quiet: bool = False) -> int:
    gt, train_stream, val_stream = make_streams(cfg)
    model = rnn.init_model(
        rnn_config(cfg, member), gt.alphabet.size, gt.output_classes,
        gt.alphabet.symbols, cfg.problem,
    )
    callbacks = []
    if not quiet:
        callbacks.append(
            lambda r: print(
                f"epoch {r.epoch}: loss={r.loss:.4f} train={r.train_acc:.4f} "
                f"val={r.val_acc:.4f} noisy_val={r.val_acc_noisy:.4f} nu={r.nu:.3f}",
                flush=True,
            )
        )
    def stop_check(m):
        # only stop on a model whose activations the extractor will accept;
        # the noisy dynamics drift in and out of the binarized regime
        _, _, record = rnn.forward_sequence(m, m.zero_state(), val_stream, record=True)
        return extract.is_binarized(record, cfg.tau_act, cfg.tau_sat)

    trace = rnn.train(model, train_stream, val_stream, callbacks,
                      stop_check if cfg.nu > 0 else None)
    out = run_dir(cfg, member)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    rnn.save_model(model, out / "model.txt")
    (out / "trace.csv").write_text(trace.to_csv())
    last = trace.records[-1] if trace.records else None
    # a run counts as converged once both accuracies reach 100%, with the
    # noise-free training accuracy as the fallback when the noisy pass
    # plateaus just under 1.0 (see run.txt for both numbers)
    train_preds, _, _ = rnn.forward_sequence(model, model.zero_state(), train_stream)
    train_acc_clean = rnn.accuracy(train_preds, train_stream.targets)
    converged = trace.converged or (
        last is not None and last.val_acc == 1.0 and train_acc_clean == 1.0
    )
    (out / "run.txt").write_text(
        f"converged={int(converged)}\n"
        f"failed={int(trace.failed)}\n"
        f"epochs={trace.epochs_run}\n"
        f"train_acc_noisy={last.train_acc if last else 0}\n"
        f"train_acc_clean={train_acc_clean}\n"
        f"val_acc={last.val_acc if last else 0}\n"
        f"val_acc_noisy={last.val_acc_noisy if last else 0}\n"
    )
    if not quiet:
        print(f"wrote {out} (converged={converged})")
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def analysis_record(model: rnn.RnnModel, cfg: ExperimentConfig):
    gt, _, val_stream = make_streams(cfg)
    preds, _, record = rnn.forward_sequence(
        model, model.zero_state(), val_stream, record=True
    )
    return gt, val_stream, preds, record


def cmd_extract(model_path: Path, cfg: ExperimentConfig, quiet: bool = False) -> int:
    model = rnn.load_model(model_path)
    if model.problem and model.problem != cfg.problem:
        cfg = ExperimentConfig(**{**cfg.__dict__, "problem": model.problem, "val_symbols": 0})
    gt, val_stream, preds, record = analysis_record(model, cfg)
    out = Path(model_path).parent / "extract"
    out.mkdir(parents=True, exist_ok=True)
    xcfg = extract.ExtractionConfig(
        cfg.tau_act, cfg.tau_sat, cfg.tau_tight, cfg.tau_w, cfg.samples_per_cluster
    )
    verdict: dict[str, object] = {"problem": cfg.problem}
    transducer = cfg.problem in langdata.ADDITION_PROBLEMS

    def finish(code: int) -> int:
        (out / "verdict.txt").write_text(
            "".join(f"{k}={v}\n" for k, v in verdict.items())
        )
        if not quiet:
            print("".join(f"{k}={v}\n" for k, v in verdict.items()), end="")
        return code

    mask = extract.detect_active(record, xcfg.tau_act)
    verdict["active_units"] = " ".join(map(str, mask.indices))
    try:
        clustering = extract.cluster_states(record, mask, xcfg.tau_sat)
    except extract.NotClusterable as exc:
        verdict["status"] = "not-clusterable"
        verdict["detail"] = exc
        return finish(EXIT_NOT_CLUSTERABLE)
    verdict["clusters"] = clustering.n_clusters

    # scatter + heatmap + saturation side artifacts
    proj = extract.pca_project(record)
    lines = ["x,y,cluster"]
    for (x, y), cid in zip(proj.coords, clustering.assignment):
        lines.append(f"{x:.8g},{y:.8g},{cid}")
    (out / "pca.csv").write_text("\n".join(lines) + "\n")
    head = record[:60]
    lines = ["step," + ",".join(f"unit{j}" for j in range(record.shape[1]))]
    for t, row in enumerate(head):
        lines.append(f"{t}," + ",".join(f"{v:.6g}" for v in row))
    (out / "activations.csv").write_text("\n".join(lines) + "\n")
    sat = extract.saturation_report(record, mask)
    lines = ["unit,fraction_saturated," + ",".join(f"bin{i}" for i in range(sat.hist_counts.shape[1]))]
    for u, f, counts in zip(sat.unit_indices, sat.fraction_saturated, sat.hist_counts):
        lines.append(f"{u},{f:.6g}," + ",".join(map(str, counts)))
    (out / "saturation.csv").write_text("\n".join(lines) + "\n")
    wrep = extract.weight_report(model, mask, xcfg.tau_w)
    (out / "weights.csv").write_text(
        "unit,back_projecting\n"
        + "".join(f"{j},{int(j in wrep.back_projecting)}\n" for j in range(model.n_hidden))
    )

    try:
        table = extract.extract_transitions(model, record, clustering, xcfg, transducer)
    except extract.NondeterministicTransition as exc:
        verdict["status"] = "nondeterministic-transition"
        verdict["detail"] = exc
        return finish(EXIT_NONDETERMINISTIC)
    except extract.UnknownDestination as exc:
        verdict["status"] = "unknown-destination"
        verdict["detail"] = exc
        return finish(EXIT_NONDETERMINISTIC)
    raw = table.to_dfa()
    minimized = automata.minimize(raw)
    (out / "table.csv").write_text(automata.transition_table_csv(raw))
    (out / "table_min.csv").write_text(automata.transition_table_csv(minimized))
    (out / "dfa_raw.dot").write_text(automata.to_dot(raw, "extracted"))
    (out / "dfa_min.dot").write_text(automata.to_dot(minimized, "minimized"))
    verdict["min_states"] = minimized.n_states
    verdict["dollar_consistent"] = int(table.dollar_consistent)

    replayed = table.replay(val_stream.inputs)
    verdict["replay_match"] = float(np.mean(replayed == preds))
    ok, cex = automata.equivalent(minimized, automata.minimize(gt.minimal_dfa))
    verdict["equivalent"] = int(ok)
    if not ok:
        verdict["counterexample"] = cex
        verdict["status"] = "inequivalent"
        return finish(EXIT_INEQUIVALENT)
    verdict["status"] = "ok"
    return finish(EXIT_OK)


def cmd_stability(model_paths: list[Path], cfg: ExperimentConfig, quiet: bool = False) -> int:
    models = [rnn.load_model(p) for p in model_paths]
    gt = langdata.make_problem(cfg.problem)
    out = Path(model_paths[0]).parent / "stability"
    out.mkdir(parents=True, exist_ok=True)

    long_res = stability.long_string_test(
        models, gt, cfg.long_strings, cfg.long_length,
        rng_seed=derive_seed(cfg.seed, ROLE_LONG_STRINGS),
    )
    (out / "long_accuracy.csv").write_text(long_res.to_csv())
    if not quiet:
        print(
            f"long strings: {long_res.n_models} models x {long_res.n_strings} strings, "
            f"min accuracy {long_res.min_accuracy:.6f}"
        )

    # perturbation analysis uses the first model's extracted machinery
    model = models[0]
    _, val_stream, _, record = analysis_record(model, cfg)
    xcfg = extract.ExtractionConfig(
        cfg.tau_act, cfg.tau_sat, cfg.tau_tight, cfg.tau_w, cfg.samples_per_cluster
    )
    try:
        mask = extract.detect_active(record, xcfg.tau_act)
        clustering = extract.cluster_states(record, mask, xcfg.tau_sat)
        table = extract.extract_transitions(
            model, record, clustering, xcfg,
            transducer=cfg.problem in langdata.ADDITION_PROBLEMS,
        )
    except extract.NotClusterable:
        if not quiet:
            print("perturbation analysis skipped: model not clusterable")
        return EXIT_NOT_CLUSTERABLE
    except extract.ExtractionError:
        return EXIT_NONDETERMINISTIC

    lines = ["sigma_p,t,dispersion"]
    match_lines = ["sigma_p,match_fraction"]
    for sigma in cfg.sigma_list:
        res = stability.perturb_and_track(
            model, clustering, table, sigma,
            n_trials=cfg.trials, horizon=cfg.horizon,
            rng_seed=derive_seed(cfg.seed, ROLE_PERTURB),
            step_budget=cfg.step_budget,
        )
        for t, d in enumerate(res.dispersion):
            lines.append(f"{sigma:g},{t},{d:.10g}")
        match_lines.append(f"{sigma:g},{res.match_fraction:.10g}")
        if not quiet:
            print(
                f"sigma={sigma}: dispersion(0)={res.dispersion[0]:.4f} "
                f"dispersion({cfg.horizon})={res.dispersion[-1]:.6f} "
                f"match={res.match_fraction:.5f}"
            )
    (out / "dispersion.csv").write_text("\n".join(lines) + "\n")
    (out / "destination_match.csv").write_text("\n".join(match_lines) + "\n")

    proj = extract.pca_project(record)
    rows = stability.transition_sweep(model, record, clustering, proj, xcfg.max_samples_per_cluster)
    (out / "sweep.csv").write_text(stability.sweep_to_csv(rows))
    return EXIT_OK


def _read_kv(path: Path) -> dict[str, str]:
    out = {}
    if path.exists():
        for line in path.read_text().splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                out[k] = v
    return out


def cmd_report(root: Path) -> int:
    header = (
        f"{'problem':<12}{'seeds':>6}{'conv':>6}{'clusters':>10}{'min_states':>12}"
        f"{'equiv':>7}{'long_min_acc':>14}{'disp(5)':>10}"
    )
    print(header)
    print("-" * len(header))
    if not root.exists():
        return EXIT_OK
    for problem_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        seeds = conv = 0
        clusters = min_states = equiv = long_acc = disp5 = "-"
        for seed_dir in sorted(p for p in problem_dir.iterdir() if p.is_dir()):
            run = _read_kv(seed_dir / "run.txt")
            if not run:
                continue
            seeds += 1
            conv += int(run.get("converged", "0"))
            verdict = _read_kv(seed_dir / "extract" / "verdict.txt")
            if verdict.get("status") == "ok":
                clusters = verdict.get("clusters", clusters)
                min_states = verdict.get("min_states", min_states)
                equiv = verdict.get("equivalent", equiv)
            long_csv = seed_dir / "stability" / "long_accuracy.csv"
            if long_csv.exists():
                accs = [float(l.rsplit(",", 1)[1]) for l in long_csv.read_text().splitlines()[1:]]
                if accs:
                    long_acc = f"{min(accs):.4f}"
            disp_csv = seed_dir / "stability" / "dispersion.csv"
            if disp_csv.exists():
                try:
                    rows = [l.split(",") for l in disp_csv.read_text().splitlines()[1:]]
                    finals = [float(r[2]) for r in rows if r[1] == max(r2[1] for r2 in rows)]
                    disp5 = f"{max(finals):.4g}"
                except (ValueError, IndexError):
                    print(f"error: malformed CSV {disp_csv}", file=sys.stderr)
                    return EXIT_ERROR
        print(
            f"{problem_dir.name:<12}{seeds:>6}{conv:>6}{str(clusters):>10}"
            f"{str(min_states):>12}{str(equiv):>7}{str(long_acc):>14}{str(disp5):>10}"
        )
    return EXIT_OK


def cmd_selftest() -> int:
    """Quick confidence checks: gradient correctness and the minimizer oracle."""
    from .selftest import gradient_check, minimization_oracle

    err = gradient_check()
    print(f"gradient check: max relative error {err:.3g} "
          f"({'ok' if err < 1e-4 else 'FAIL'})")
    bad = minimization_oracle(n_dfas=100)
    print(f"minimization oracle: {bad} mismatches on 100 random DFAs "
          f"({'ok' if bad == 0 else 'FAIL'})")
    return EXIT_OK if err < 1e-4 and bad == 0 else EXIT_ERROR


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="key=value config file")
    for f_name, f_type in (
        ("problem", str), ("seed", int), ("n-hidden", int), ("nu", float),
        ("l1", float), ("lr", float), ("clip", float), ("bptt-steps", int),
        ("epochs", int), ("min-epochs", int),
        ("train-symbols", int), ("val-symbols", int),
        ("max-segment", int), ("positive-frac", float), ("ramp-end", float),
        ("tau-act", float), ("tau-sat", float),
        ("tau-tight", float), ("tau-w", float), ("samples-per-cluster", int),
        ("long-length", int), ("long-strings", int), ("sigmas", str),
        ("trials", int), ("horizon", int), ("step-budget", int),
        ("out-dir", str),
    ):
        p.add_argument(f"--{f_name}", type=f_type, default=None)
    p.add_argument("--noise-ramp", action="store_true", default=None)
    p.add_argument("--quiet", action="store_true")


def _build_config(args) -> ExperimentConfig:
    overrides = {
        k.replace("-", "_"): v
        for k, v in vars(args).items()
        if k not in ("command", "config", "quiet", "model", "models", "member", "out")
        and v is not None
    }
    if args.config:
        return load_config(args.config, **overrides)
    return ExperimentConfig(**overrides)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rnn2dfa",
        description="Train noisy recurrent networks on symbol streams and distill them into DFAs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one network, write model + trace")
    _add_config_flags(p)
    p.add_argument("--member", type=int, default=0, help="ensemble member index")

    p = sub.add_parser("extract", help="cluster, build transition table, minimize, verify")
    _add_config_flags(p)
    p.add_argument("--model", type=Path, required=True)

    p = sub.add_parser("stability", help="long-string and perturbation experiments")
    _add_config_flags(p)
    p.add_argument("--models", type=Path, nargs="+", required=True)

    p = sub.add_parser("report", help="summarize an output directory")
    p.add_argument("--out", type=Path, default=None)

    sub.add_parser("selftest", help="gradient check and minimization oracle")

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(_build_config(args), args.member, args.quiet)
        if args.command == "extract":
            return cmd_extract(args.model, _build_config(args), args.quiet)
        if args.command == "stability":
            return cmd_stability(args.models, _build_config(args), args.quiet)
        if args.command == "report":
            root = args.out or Path(os.environ.get(OUT_ENV, ".")) / "runs"
            return cmd_report(root)
        if args.command == "selftest":
            return cmd_selftest()
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
