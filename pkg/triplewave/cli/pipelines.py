"""
Pipelines behind the triplewave subcommands.

Each pipeline reads the resolved RunConfig, writes its artifacts under
<out>/<pipeline>/ and returns a result dict with "success", "message"
and "exit_code".
"""

import logging
import warnings
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from triplewave import __version__
from triplewave.anisonorm import (
    AnisoIndex,
    conormal_model,
    incoming_order_threshold,
    kernel_integral,
    linf_embedding_check,
    product_closure_check,
)
from triplewave.cli.config import RunConfig
from triplewave.detector import (
    cubic_discriminator,
    export_ridge_csv,
    normal_transect,
    relative_order_gap,
    spectral_slope,
)
from triplewave.detector.fronts import q_slice_points
from triplewave.errors import (
    ArgumentError,
    ConfigError,
    DomainError,
    HypothesisWarning,
    PreconditionError,
    TripleWaveError,
    UnsupportedError,
)
from triplewave.geometry.flowout import (
    apparent_front_speed,
    caustic_scan,
    export_front_mesh,
    flow_out,
)
from triplewave.geometry.rays import StepControl, export_ray_csv, trace_ray
from triplewave.scenarios.catalog import Scenario, closed_form_distance, make_scenario
from triplewave.solver import (
    ConormalProfile,
    Grid,
    Nonlinearity,
    conormal_sources,
    export_grid_field,
    interaction_cutoff,
    run,
)
from triplewave.symbolcalc.orders import (
    incoming_class_order,
    k_of_m,
    pair_interaction_report,
    product_order,
    triple_output_order,
)
from triplewave.symbolcalc.prediction import predicted_leading_term
from triplewave.utils.io import write_columns, write_json_report
from triplewave.utils.smooth import plateau

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

_USAGE_ERRORS = (ConfigError, ArgumentError, PreconditionError, UnsupportedError, DomainError)


def exit_code_for(error: Exception) -> int:
    """Exit code of a failed pipeline."""
    if isinstance(error, _USAGE_ERRORS):
        return EXIT_USAGE
    return EXIT_NUMERIC


class PipelineRunner:
    """
    PipelineRunner drives the geometry, solver, detector and norm pipelines
    from a single RunConfig and writes reproducible reports.
    """

    def __init__(self, config: RunConfig, out_dir: Optional[str] = None, threads: Optional[int] = None):
        """
        Initialize a new PipelineRunner.

        Args:
            config: Resolved run configuration
            out_dir: Output directory; overrides config.output_dir
            threads: Worker cap for ray tracing; overrides config.geometry.threads
        """
        self.config = config
        self.out_dir = Path(out_dir if out_dir is not None else config.output_dir)
        self.threads = int(threads) if threads is not None else config.geometry.threads
        self.rng = np.random.default_rng(config.seed)

    def _pipeline_dir(self, name: str) -> Path:
        path = self.out_dir / name
        path.mkdir(parents=True, exist_ok=True)
        return path

    def _write_metadata(self, directory: Path, name: str) -> None:
        write_json_report(directory / "metadata.json", {
            "pipeline": name,
            "version": __version__,
            "created": datetime.now(timezone.utc).isoformat(),
        })

    def _finish(self, name: str, result: Dict[str, Any], report: Dict[str, Any]) -> Dict[str, Any]:
        directory = self._pipeline_dir(name)
        report = {**report, "config": self.config.to_dict(), "success": result["success"]}
        result["report"] = str(write_json_report(directory / f"{name}_report.json", report))
        self._write_metadata(directory, name)
        return result

    def _failed(self, name: str, result: Dict[str, Any], error: TripleWaveError) -> Dict[str, Any]:
        logger.error(f"{name} pipeline failed: {error}")
        result.update({"success": False, "message": f"{type(error).__name__}: {error}",
                       "exit_code": exit_code_for(error)})
        return result

    def _scenario(self) -> Scenario:
        spec = self.config.scenario
        return make_scenario(spec.id, spec.params, tol_eikonal=self.config.tolerances.eikonal)

    def _step_control(self) -> StepControl:
        tol = self.config.tolerances
        geo = self.config.geometry
        return StepControl(method=geo.method, rtol=tol.rtol, atol=tol.atol, n_samples=geo.s_samples,
                           tol_null=tol.null)

    def _gamma_points(self, scenario: Scenario) -> Tuple[np.ndarray, np.ndarray]:
        geo = self.config.geometry
        if geo.gamma_count == 0:
            return np.zeros((0, scenario.gamma_dim)), np.zeros((0, scenario.dim))
        if geo.gamma_sampling == "random" and scenario.gamma_dim > 0:
            lo, hi = scenario.gamma_range[0]
            params = np.sort(self.rng.uniform(lo, hi, geo.gamma_count))[:, None]
            return params, scenario.closed_form_Gamma(params)
        return scenario.gamma_samples(geo.gamma_count)

    # rays

    def run_rays(self) -> Dict[str, Any]:
        """
        Trace the null bicharacteristics leaving Gamma.

        Writes rays.csv and rays_report.json with per-ray null drift and,
        when the scenario has a closed form, the distance of every sample
        to Q.
        """
        result = {"success": False, "message": "", "exit_code": EXIT_NUMERIC, "n_rays": 0}
        try:
            scenario = self._scenario()
            geo = self.config.geometry
            params, points = self._gamma_points(scenario)
            fibers = scenario.fibers(points, geo.angular_res, geo.nappe) if len(points) else []
            ctrl = self._step_control()
            rays = [trace_ray(scenario.operator, pt, geo.s_max, ctrl, direction=geo.direction)
                    for fiber in fibers for pt in fiber]
            directory = self._pipeline_dir("rays")
            export_ray_csv(rays, directory / "rays.csv", scenario.dim)

            drifts = [float(r.step_stats.get("null_drift", 0.0)) for r in rays]
            conserved = all(r.step_stats.get("null_conserved", True) for r in rays)
            distance = None
            if scenario.closed_form_Q is not None and rays:
                distance = closed_form_distance(scenario, np.concatenate([r.y for r in rays]))
            on_q = distance is None or distance <= self.config.tolerances.closed_form
            logger.info(f"run_rays: traced {len(rays)} ray(s) for {scenario.id}")

            result.update({
                "success": bool(conserved and on_q),
                "n_rays": len(rays),
                "exit_code": EXIT_OK if conserved and on_q else EXIT_VERDICT,
                "message": f"Traced {len(rays)} ray(s)" if conserved and on_q
                           else "Rays drift off the null set or off the closed-form Q",
            })
            report = {
                "scenario": scenario.to_config(),
                "n_rays": len(rays),
                "gamma_params": params,
                "step_control": ctrl.to_dict(),
                "null_drift_max": max(drifts) if drifts else 0.0,
                "null_conserved": conserved,
                "closed_form_distance": distance,
                "rays": [dict(r.step_stats) for r in rays],
            }
            return self._finish("rays", result, report)
        except TripleWaveError as e:
            return self._failed("rays", result, e)

    # flow-out

    def run_flowout(self) -> Dict[str, Any]:
        """
        Assemble the flow-out mesh of Gamma, compare it with the closed-form
        Q and scan it for caustics.
        """
        result = {"success": False, "message": "", "exit_code": EXIT_NUMERIC}
        try:
            scenario = self._scenario()
            geo = self.config.geometry
            tol = self.config.tolerances
            params, points = self._gamma_points(scenario)
            if len(points) == 0:
                raise ArgumentError("flow-out needs at least one Gamma sample")
            fibers = scenario.fibers(points, geo.angular_res, geo.nappe)
            mesh = flow_out(scenario.operator, points, fibers, geo.s_max, geo.s_samples,
                            step_ctrl=self._step_control(), gamma_params=params,
                            tol_caustic=tol.caustic, threads=self.threads, scenario_id=scenario.id)
            directory = self._pipeline_dir("flowout")
            export_front_mesh(mesh, directory / "front_mesh.bin")

            valid = mesh.valid_nodes()
            nodes = mesh.points[valid]
            write_columns(directory / "front_nodes.dat",
                          {name: nodes[:, j] for j, name in enumerate(_axis_names(scenario.dim))})
            flagged = mesh.points[mesh.caustic_flag & ~mesh.hole]
            write_columns(directory / "caustic_nodes.dat",
                          {name: flagged[:, j] for j, name in enumerate(_axis_names(scenario.dim))})

            distance = None
            if scenario.closed_form_Q is not None:
                distance = closed_form_distance(scenario, nodes)
            caustics = caustic_scan(mesh)

            speed = None
            if geo.speed_x3 is not None and geo.speed_times:
                speed = apparent_front_speed(mesh, geo.speed_x3, geo.speed_times)
                write_columns(directory / "front_speed.dat", speed)

            ok = distance is None or distance <= tol.closed_form
            result.update({
                "success": bool(ok),
                "exit_code": EXIT_OK if ok else EXIT_VERDICT,
                "message": f"Flow-out mesh {mesh.shape} with {caustics['count']} caustic component(s)"
                           if ok else f"Mesh leaves the closed-form Q (distance {distance:.3e})",
                "closed_form_distance": distance,
            })
            report = {
                "scenario": scenario.to_config(),
                "mesh_shape": list(mesh.shape),
                "valid_nodes": int(valid.sum()),
                "holes": [list(k) for k in sorted(mesh.errors)],
                "tolerances": mesh.tolerances,
                "closed_form_distance": distance,
                "caustics": caustics,
                "front_speed": speed,
            }
            return self._finish("flowout", result, report)
        except TripleWaveError as e:
            return self._failed("flowout", result, e)

    # experiment

    def _profiles(self, scenario: Scenario, h: float) -> List[ConormalProfile]:
        out = []
        for spec, surf in zip(self.config.profiles, scenario.surfaces):
            eps = 4.0 * h if spec.smoothing_eps is None else spec.smoothing_eps
            out.append(ConormalProfile(kind=spec.kind, order=spec.order, smoothing_eps=eps,
                                       amplitude=spec.amplitude, width=spec.width, surface=surf.label))
        return out

    def _nonlinearities(self, scenario: Scenario) -> Dict[str, Nonlinearity]:
        spec = self.config.nonlinearity
        center = spec.cutoff_center
        if center is None:
            _, q = scenario.gamma_samples(1)
            center = q[0, 1:].tolist()
        cutoff = interaction_cutoff(center, spec.cutoff_radius, spec.t_on, spec.t_full)
        chi = None
        if spec.chi_hole_radius > 0:
            c = np.asarray(center, dtype=float)
            radius = spec.chi_hole_radius

            def chi(y):
                r = np.linalg.norm(np.asarray(y, dtype=float)[..., 1:] - c, axis=-1)
                return 1.0 - plateau(r, 0.5 * radius, radius)

        try:
            coeffs = {int(k): float(v) for k, v in spec.coeffs.items()}
        except (TypeError, ValueError) as e:
            raise ConfigError(f"polynomial powers must be integers: {e}", field="nonlinearity.coeffs") from e
        scale = max((abs(v) for v in coeffs.values()), default=1.0) or 1.0
        return {
            "cubic": Nonlinearity.polynomial(coeffs, cutoff, chi=chi),
            "quadratic": Nonlinearity.polynomial({2: scale}, cutoff, chi=chi),
            "linear": Nonlinearity.zero(),
        }

    def _order_gap(self, scenario: Scenario, runs, t: float, m: float) -> Dict[str, Any]:
        """Spectral slopes on an incoming and on a Q normal transect (two space dimensions)."""
        grid = runs["linear"].grid
        det = self.config.detector
        if grid.ndim != 2 or not all((s.wave or {}).get("kind") == "plane" for s in scenario.surfaces):
            return {"skipped": True, "reason": "order gap transects need plane waves in two space dimensions"}
        _, q = scenario.gamma_samples(1)
        t_meet, center = float(q[0, 0]), q[0, 1:]
        radius = t - t_meet
        if radius <= 0:
            return {"skipped": True, "reason": "Q has not formed at the recorded time"}
        omegas = [-np.asarray(s.wave["normal"][1:]) for s in scenario.surfaces]
        lower = [a[0] for a in grid.axes]

        # incoming transect: across line 1, away from the cone
        w = omegas[0]
        perp = np.array([-w[1], w[0]])
        offset = 0.5 * (min(g[-1] - g[0] for g in grid.axes) / 2.0 + radius)
        p_in = center + radius * w + offset * perp
        incoming = runs["linear"].at(t)
        s_in, ds = normal_transect(incoming, grid.h, lower, p_in, w, length=det.transect_length)

        # Q transect: along the direction farthest from every line normal
        angles = np.linspace(0.0, 2 * np.pi, 360, endpoint=False)
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])
        spread = np.min(np.arccos(np.clip(dirs @ np.asarray(omegas).T, -1.0, 1.0)), axis=1)
        u = dirs[int(np.argmax(spread))]
        wave_q = runs["cubic"].at(t) - incoming
        s_q, _ = normal_transect(wave_q, grid.h, lower, center + radius * u, u, length=det.transect_length)

        est_in = spectral_slope(s_in, h=ds)
        est_q = spectral_slope(s_q, h=ds)
        gap = relative_order_gap(est_in, est_q, 2.0 * m - 0.5, tolerance=det.gap_tolerance)
        gap.update({"skipped": False, "incoming_point": p_in, "q_point": center + radius * u})
        return gap

    def run_experiment(self) -> Dict[str, Any]:
        """
        Matched solver runs with f = configured nonlinearity, u^2 and 0,
        the cubic discriminator and the symbol-calculus prediction.

        The exit code is 1 when the measured verdict differs from the
        predicted on/off pattern, or when a predicted and detected new wave
        misses the predicted relative order.
        """
        result = {"success": False, "message": "", "exit_code": EXIT_NUMERIC, "verdict": None}
        try:
            cfg = self.config
            scenario = self._scenario()
            grid = Grid.uniform(cfg.grid.lower, cfg.grid.upper, cfg.grid.points)
            if grid.ndim + 1 != scenario.dim:
                raise ConfigError(f"grid has {grid.ndim} axes but scenario {scenario.id} needs {scenario.dim - 1}",
                                  field="grid")
            h = float(np.max(grid.h))
            profiles = self._profiles(scenario, h)
            nonlinearities = self._nonlinearities(scenario)
            spec = cfg.nonlinearity
            source = None
            if spec.forcing:
                source = conormal_sources(scenario.surfaces, profiles, spec.t_on, spec.t_full)

            directory = self._pipeline_dir("experiment")
            runs = {}
            for key, nl in nonlinearities.items():
                runs[key] = run(scenario, profiles, nl, cfg.grid.t_end, [cfg.grid.t_end], grid,
                                t0=cfg.grid.t_start, cfl=cfg.grid.cfl, bc=cfg.grid.bc,
                                sponge_width=cfg.grid.sponge_width, source=source,
                                zero_initial_data=spec.forcing)
                export_grid_field(runs[key], directory / f"field_{key}.bin")

            det = cfg.detector
            band = tuple(det.band) if det.band is not None else None
            verdict, front = cubic_discriminator(
                runs, scenario, band=band, r_min=det.r_min, mask_cells=det.mask_cells,
                tube_cells=det.tube_cells, kappa=det.kappa, rel_peak=det.rel_peak,
                coverage_min=det.coverage_min, return_front=True,
            )
            t = verdict["time"]
            export_ridge_csv(front, directory / "ridge.csv")
            names = _axis_names(grid.ndim + 1)[1:]
            write_columns(directory / "ridge.dat",
                          {**{n: front.points[:, j] for j, n in enumerate(names)}, "strength": front.strength})
            q_pts = q_slice_points(scenario, grid, t) if scenario.closed_form_Q is not None else np.zeros((0, 2))
            write_columns(directory / "q_slice.dat", {n: q_pts[:, j] for j, n in enumerate(names)})

            cubic_nl = nonlinearities["cubic"]
            m = profiles[0].decay_exponent

            def d3f(q, u):
                return cubic_nl.cutoff(q) * cubic_nl.d3f_on_gamma(q, u)

            def u_on_gamma(q):
                return sum(p(s.phi(q)) for p, s in zip(profiles, scenario.surfaces))

            with warnings.catch_warnings():
                warnings.simplefilter("ignore", HypothesisWarning)
                prediction = predicted_leading_term(scenario, m, d3f, u_on_gamma=u_on_gamma)
            gap = self._order_gap(scenario, runs, t, m)

            measured_on = verdict["verdict"] == "ON"
            agrees = measured_on == prediction["on"]
            # the gap is checked only when a new wave was predicted and detected
            gap_checked = agrees and measured_on and not gap.get("skipped", True)
            gap_ok = not gap_checked or bool(gap["passed"])
            ok = agrees and gap_ok
            message = (f"Verdict {verdict['verdict']} ({'matches' if agrees else 'contradicts'} the predicted "
                       f"{'ON' if prediction['on'] else 'OFF'})")
            if not gap_ok:
                measured = gap.get("measured_gap")
                message += (f", but the order gap {'is not measurable' if measured is None else f'{measured:.2f}'}"
                            f" misses the predicted {gap['predicted_gap']:.2f}")
            result.update({
                "success": bool(ok),
                "verdict": verdict["verdict"],
                "predicted_on": prediction["on"],
                "order_gap_checked": gap_checked,
                "order_gap_passed": gap_ok,
                "exit_code": EXIT_OK if ok else EXIT_VERDICT,
                "message": message,
            })
            report = {
                "scenario": scenario.to_config(),
                "grid": grid.to_dict(),
                "profiles": [p.to_dict() for p in profiles],
                "runs": {k: {"nonlinearity": r.metadata["nonlinearity"], "dt": r.metadata["dt"],
                             "n_steps": r.metadata["n_steps"], "cfl": r.cfl, "times": r.times}
                         for k, r in runs.items()},
                "forcing": spec.forcing,
                "discriminator": verdict,
                "prediction": {k: v for k, v in prediction.items() if k not in ("gamma_points", "gamma_params")},
                "order_gap": gap,
                "n_ridge_points": len(front),
            }
            return self._finish("experiment", result, report)
        except TripleWaveError as e:
            return self._failed("experiment", result, e)

    # norms

    def _field_families(self, idx: AnisoIndex, delta: float) -> Dict[str, Any]:
        npts = self.config.norms.field_points
        length = 12.0
        h = length / npts
        y = -0.5 * length + h * np.arange(npts)
        y1, y2, y3 = np.meshgrid(y, y, y, indexing="ij")
        m = self.config.norms.m
        bump = np.exp(-(y1 ** 2 + y2 ** 2 + y3 ** 2))
        wave1 = conormal_model(y1, m) * np.exp(-0.5 * (y2 ** 2 + y3 ** 2))
        wave2 = conormal_model(y2, m) * np.exp(-0.5 * (y1 ** 2 + y3 ** 2))
        triple = conormal_model(y1, m) * conormal_model(y2, m) * conormal_model(y3, m)

        families: Dict[str, Any] = {
            "bump_product": product_closure_check(bump, bump, h, idx, delta),
            "conormal_product": product_closure_check(wave1, wave2, h, idx, delta),
            "embedding": linf_embedding_check(triple, h, idx, delta),
        }
        weak = AnisoIndex(idx.s, *(0.5 * min(idx.k),) * 3)
        try:
            families["below_product_threshold"] = product_closure_check(wave1, wave2, h, weak, delta)
        except PreconditionError as e:
            families["below_product_threshold"] = {"refused": True, "index": weak.to_dict(), "reason": str(e)}
        return families

    def run_norms(self) -> Dict[str, Any]:
        """
        Anisotropic norm checks: the incoming-order threshold scan, kernel
        integrals and the product and embedding properties on model fields.
        """
        result = {"success": False, "message": "", "exit_code": EXIT_NUMERIC}
        try:
            spec = self.config.norms
            threshold = incoming_order_threshold(spec.m, spec.r_values, spec.base_points, spec.refinements)
            directory = self._pipeline_dir("norms")
            rows = threshold["rows"]
            write_columns(directory / "threshold.dat", {
                "r": [row["r"] for row in rows],
                "exponent": [row["exponent"] if np.isfinite(row["exponent"]) else np.nan for row in rows],
                "growth": [row["growth"] for row in rows],
            })

            kernels = []
            for i, case in enumerate(spec.kernel_cases):
                unknown = set(case) - {"n", "k", "s", "delta"}
                if unknown or "n" not in case or len(case.get("k", [])) != 3:
                    raise ConfigError("kernel case needs n, three k values and optional s, delta",
                                      field=f"norms.kernel_cases.{i}")
                idx = AnisoIndex(float(case.get("s", 0.0)), *(float(k) for k in case["k"]))
                kernels.append(kernel_integral(idx, int(case["n"]), float(case.get("delta", spec.delta))))

            families = self._field_families(AnisoIndex(0.0, 1.0, 1.0, 1.0), spec.delta)
            embedding_ok = families["embedding"]["satisfied"]
            ok = bool(threshold["within"] and embedding_ok)
            result.update({
                "success": ok,
                "exit_code": EXIT_OK if ok else EXIT_VERDICT,
                "message": f"Threshold measured {threshold['measured']:.3g} "
                           f"(predicted {threshold['predicted']:.3g})",
                "threshold": threshold["measured"],
            })
            report = {
                "threshold": threshold,
                "kernel_cases": kernels,
                "kernel_agreement": all(k["numeric_agrees"] for k in kernels),
                "families": families,
            }
            return self._finish("norms", result, report)
        except TripleWaveError as e:
            return self._failed("norms", result, e)

    # symbol bookkeeping

    def run_symbols(self, n_values=(3, 4, 5)) -> Dict[str, Any]:
        """
        Scan of the order formulas over m in [-12, -1.01] with step 0.01.
        """
        result = {"success": False, "message": "", "exit_code": EXIT_NUMERIC}
        try:
            ms = np.round(np.arange(-12.0, -1.01 + 1e-9, 0.01), 2)
            failures = []
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", HypothesisWarning)
                for n in n_values:
                    previous = None
                    for m in ms:
                        k = k_of_m(m)
                        if not (-m - 2 <= k + 1e-9 and k < -m - 1):
                            failures.append({"m": m, "n": n, "check": "k_of_m range"})
                        if abs(product_order(m, 1, n) - incoming_class_order(m, n)) > 1e-12:
                            failures.append({"m": m, "n": n, "check": "single factor order"})
                        orders = [product_order(m, N, n) for N in (1, 2, 3)]
                        if any(b > a + 1e-12 for a, b in zip(orders, orders[1:])):
                            failures.append({"m": m, "n": n, "check": "product order monotone in N"})
                        out = triple_output_order(m, n)["output_order"]
                        if previous is not None and out < previous:
                            failures.append({"m": m, "n": n, "check": "output order monotone in m"})
                        if out >= incoming_class_order(m, n):
                            failures.append({"m": m, "n": n, "check": "new wave weaker than incoming"})
                        previous = out
            pairs = {str(n): pair_interaction_report(-6.0, n) for n in n_values}
            ok = not failures
            result.update({"success": ok, "exit_code": EXIT_OK if ok else EXIT_VERDICT,
                           "message": f"Checked {len(ms) * len(n_values)} (m, n) pair(s), {len(failures)} failure(s)"})
            report = {"n_values": list(n_values), "m_range": [float(ms[0]), float(ms[-1])], "step": 0.01,
                      "failures": failures[:100], "n_failures": len(failures), "pair_interaction": pairs}
            return self._finish("symbols", result, report)
        except TripleWaveError as e:
            return self._failed("symbols", result, e)

    def verify_all(self) -> Dict[str, Any]:
        """
        Run every configured pipeline plus the symbol scan; the exit code is
        the most severe one.
        """
        order = ["rays", "flowout", "norms", "experiment"]
        runners = {"rays": self.run_rays, "flowout": self.run_flowout, "norms": self.run_norms,
                   "experiment": self.run_experiment}
        results = {"symbols": self.run_symbols()}
        for name in order:
            if name in self.config.pipelines:
                results[name] = runners[name]()
        exit_code = max(r["exit_code"] for r in results.values())
        failed = [name for name, r in results.items() if not r["success"]]
        summary = {name: {"success": r["success"], "exit_code": r["exit_code"], "message": r["message"]}
                   for name, r in results.items()}
        write_json_report(self.out_dir / "verify_all_report.json",
                          {"results": summary, "exit_code": exit_code, "config": self.config.to_dict()})
        return {
            "success": not failed,
            "exit_code": exit_code,
            "message": "All checks passed" if not failed else f"Failed: {', '.join(failed)}",
            "results": summary,
        }


def _axis_names(dim: int) -> List[str]:
    return ["t"] + [f"x{j}" for j in range(1, dim)]
