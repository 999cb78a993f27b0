"""Experiment drivers: configuration, the four result writers, manifests.

Each runner reads an ExperimentConfig, assembles what it needs, and
writes CSV results plus a manifest (configuration actually used and
library versions, no timestamps) into the output directory, so reruns
with an identical configuration are bitwise identical.

CSV schemas (column order is part of the contract):

- reconstruction.csv: formulation, rel_error, kept, defined
- love_scan.csv: theta_deg, phi_deg, reference, <one column per formulation>
- love_deviation.csv: formulation, rel_l2_deviation, defined
- interior_scan.csv: x, y, masked, reference, <one column per formulation>
- interior_summary.csv: formulation, interior_mean, exterior_rel_error
- conditioning.csv: frequency_hz, wavenumber, formulation, condition,
  requested, used, clamped
- cancellation.csv: wavenumber, star_to_loop_norm, loop_to_star_norm,
  unprojected_norm

Formulation names: "magnetic" and "electric" are the composed
single-current systems, "magnetic-scaled" / "electric-scaled" their
loop-star stabilized variants, "direct-single" / "direct-double" the
baselines.  Moduli and field magnitudes are Euclidean norms of the
complex 3-vectors.  The interior scan normalizes on the largest
reference magnitude over the exterior grid points (the reference blows
up at the dipole itself, which would make an all-points maximum
meaningless).
"""

import configparser
import csv
import json
import platform
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__, formulations, linalg, sources
from .exceptions import ConfigError
from .helmholtz import measure_cancellation
from .mesh import generate_sphere
from .operators import SurfaceSpaces, radiate
from .quadrature import QuadratureConfig

LIGHT_SPEED = 2.99792458e8

RECONSTRUCTION_SET = ("magnetic", "electric", "direct-single", "direct-double")
CONDITIONING_SET = ("magnetic", "electric", "magnetic-scaled", "electric-scaled")

_BUILDERS = {
    "magnetic": formulations.build_magnetic_system,
    "electric": formulations.build_electric_system,
    "magnetic-scaled": formulations.build_stabilized_magnetic,
    "electric-scaled": formulations.build_stabilized_electric,
    "direct-single": formulations.build_baseline_single,
    "direct-double": formulations.build_baseline_double,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment knobs; None means "derive the default".

    The derived defaults are the measurement radius (source radius plus
    one wavelength), the dipole position (0.2 source radii along +x, an
    off-center spot that breaks the symmetry of a centered source), the
    grid extent (measurement radius), the exclusion-shell width (a
    quarter source radius, clear of the radiation clearance guard), and
    the evaluation radius (twice the measurement radius).
    """

    frequency: float = 5e9
    source_radius: float = 0.04
    source_subdivisions: int = 2
    measure_radius: float | None = None
    measure_subdivisions: int = 2
    dipole_position: tuple | None = None
    dipole_moment: tuple = (0.0, 0.0, 1.0)
    test_order: int = 3
    source_order: int = 4
    solve_tol: float = 1e-8
    conditioning_count: int = 800
    sweep: tuple = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9)
    cancellation_ks: tuple = (2.5, 1.25, 0.625, 0.3125, 0.15625)
    theta_min: float = 15.0
    theta_max: float = 165.0
    theta_count: int = 31
    phi: float = 0.0
    grid_extent: float | None = None
    grid_count: int = 41
    shell_width: float | None = None
    eval_radius: float | None = None
    eval_count: int = 200
    out_dir: str = "results"
    seed: int | None = None

    @property
    def wavelength(self):
        return LIGHT_SPEED / self.frequency

    @property
    def wavenumber(self):
        return 2.0 * np.pi * self.frequency / LIGHT_SPEED

    def resolved_measure_radius(self):
        if self.measure_radius is not None:
            return self.measure_radius
        return self.source_radius + self.wavelength

    def resolved_dipole_position(self):
        if self.dipole_position is not None:
            return tuple(self.dipole_position)
        return (0.2 * self.source_radius, 0.0, 0.0)

    def resolved_grid_extent(self):
        return self.grid_extent if self.grid_extent is not None else self.resolved_measure_radius()

    def resolved_shell_width(self):
        return self.shell_width if self.shell_width is not None else 0.25 * self.source_radius

    def resolved_eval_radius(self):
        return self.eval_radius if self.eval_radius is not None else 2.0 * self.resolved_measure_radius()

    def validate(self):
        def need(cond, why):
            if not cond:
                raise ConfigError(why)

        need(self.frequency > 0, "frequency must be positive")
        need(self.source_radius > 0, "source radius must be positive")
        need(self.source_subdivisions >= 0 and self.measure_subdivisions >= 0,
             "subdivision counts cannot be negative")
        need(self.resolved_measure_radius() > self.source_radius,
             "measurement surface must strictly enclose the source surface")
        need(self.test_order >= 1 and self.source_order >= 1,
             "quadrature orders must be at least 1")
        need(self.solve_tol >= 0, "solve tolerance cannot be negative")
        need(self.conditioning_count >= 2,
             "conditioning needs at least two singular values")
        need(len(self.sweep) >= 1 and all(f > 0 for f in self.sweep),
             "sweep frequencies must be positive")
        need(all(k > 0 for k in self.cancellation_ks),
             "cancellation wavenumbers must be positive")
        need(0.0 <= self.theta_min < self.theta_max <= 180.0,
             "theta scan bounds must satisfy 0 <= min < max <= 180")
        need(self.theta_count >= 1 and self.grid_count >= 2 and self.eval_count >= 1,
             "point counts are too small")
        need(self.resolved_grid_extent() > 0 and self.resolved_shell_width() > 0,
             "grid extent and shell width must be positive")
        need(self.resolved_eval_radius() > self.resolved_measure_radius(),
             "evaluation sphere must lie outside the measurement surface")
        source_mesh = generate_sphere(self.source_radius, self.source_subdivisions)
        inside = source_mesh.contains_points([self.resolved_dipole_position()])[0]
        need(bool(inside), "dipole must lie strictly inside the source surface")
        return self

    @classmethod
    def load(cls, path):
        """Read a sectioned key-value file; unknown keys are errors."""
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc

        known = {
            "experiment": {"frequency": ("frequency", _as_float),
                           "output": ("out_dir", str)},
            "geometry": {"radius": ("source_radius", _as_float),
                         "subdivisions": ("source_subdivisions", _as_int),
                         "measure_radius": ("measure_radius", _as_float),
                         "measure_subdivisions": ("measure_subdivisions", _as_int)},
            "dipole": {"position": ("dipole_position", _as_vector),
                       "moment": ("dipole_moment", _as_vector)},
            "quadrature": {"test_order": ("test_order", _as_int),
                           "source_order": ("source_order", _as_int)},
            "solve": {"tolerance": ("solve_tol", _as_float),
                      "conditioning_count": ("conditioning_count", _as_int)},
            "sweep": {"frequencies": ("sweep", _as_float_list)},
            "cancellation": {"wavenumbers": ("cancellation_ks", _as_float_list)},
            "scan": {"theta_min": ("theta_min", _as_float),
                     "theta_max": ("theta_max", _as_float),
                     "count": ("theta_count", _as_int),
                     "phi": ("phi", _as_float)},
            "grid": {"extent": ("grid_extent", _as_float),
                     "count": ("grid_count", _as_int),
                     "shell": ("shell_width", _as_float)},
            "evaluation": {"radius": ("eval_radius", _as_float),
                           "count": ("eval_count", _as_int)},
        }
        overrides = {}
        for section in parser.sections():
            if section not in known:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in known[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                if raw.strip() == "":
                    continue
                name, convert = known[section][key]
                try:
                    overrides[name] = convert(raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"bad value for {key!r} in [{section}]: {raw!r}") from exc
        return cls(**overrides)

    def manifest_dict(self):
        """All knobs with derived defaults resolved, JSON-serializable."""
        return {
            "frequency_hz": self.frequency,
            "source_radius": self.source_radius,
            "source_subdivisions": self.source_subdivisions,
            "measure_radius": self.resolved_measure_radius(),
            "measure_subdivisions": self.measure_subdivisions,
            "dipole_position": list(self.resolved_dipole_position()),
            "dipole_moment": list(self.dipole_moment),
            "test_order": self.test_order,
            "source_order": self.source_order,
            "solve_tol": self.solve_tol,
            "conditioning_count": self.conditioning_count,
            "sweep_hz": [float(f) for f in self.sweep],
            "cancellation_wavenumbers": [float(k) for k in self.cancellation_ks],
            "theta_deg": [self.theta_min, self.theta_max, self.theta_count],
            "phi_deg": self.phi,
            "grid_extent": self.resolved_grid_extent(),
            "grid_count": self.grid_count,
            "shell_width": self.resolved_shell_width(),
            "eval_radius": self.resolved_eval_radius(),
            "eval_count": self.eval_count,
            "seed": self.seed,
        }


def _as_float(raw):
    return float(raw)


def _as_int(raw):
    value = int(raw)
    return value


def _as_float_list(raw):
    parts = raw.replace(",", " ").split()
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _as_vector(raw):
    values = _as_float_list(raw)
    if len(values) != 3:
        raise ValueError("expected three components")
    return values


class Workbench:
    """Geometry, spaces, and the operator suite for one configuration.

    `frequency` overrides the config frequency (conditioning sweep); the
    geometry, including the derived measurement radius, always comes
    from the config so a sweep varies only the wavenumber.
    """

    def __init__(self, cfg, frequency=None):
        self.cfg = cfg
        self.frequency = cfg.frequency if frequency is None else frequency
        self.k = 2.0 * np.pi * self.frequency / LIGHT_SPEED
        self.gamma = SurfaceSpaces(
            generate_sphere(cfg.source_radius, cfg.source_subdivisions))
        self.gamma_m = SurfaceSpaces(
            generate_sphere(cfg.resolved_measure_radius(), cfg.measure_subdivisions))
        quad = QuadratureConfig(order_test=cfg.test_order,
                                order_source=cfg.source_order)
        self.suite = formulations.OperatorSuite(self.gamma, self.gamma_m,
                                                self.k, quad)
        self.spec = sources.DipoleSpec(cfg.resolved_dipole_position(),
                                       cfg.dipole_moment, self.frequency)

    def solve(self, name):
        """Build and TSVD-solve one formulation; returns (system, solution, kept)."""
        system = _BUILDERS[name](self.suite, self.spec)
        solution, kept = linalg.tsvd_solve(system.matrix, system.rhs,
                                           rel_tol=self.cfg.solve_tol)
        return system, solution, kept

    def current_pair(self, name, system, solution):
        """The (-m, eta j) SurfaceCurrent pair a solved formulation radiates with."""
        coefs = system.current_coefficients(solution)
        n = self.gamma.n_edges
        if name == "direct-double":
            from .basis import SurfaceCurrent

            mag = SurfaceCurrent(self.gamma.rwg, "magnetic", coefs[:n], self.k)
            ele = SurfaceCurrent(self.gamma.bc, "electric", coefs[n:], self.k)
            return mag, ele
        if name == "direct-single":
            return system.current(solution, self.gamma.rwg), None
        primary = system.current(solution, self.gamma.rwg)
        companion = formulations.recover_companion(self.suite, primary)
        if primary.kind == "magnetic":
            return primary, companion
        return companion, primary


def _fibonacci_directions(count):
    """Deterministic, roughly uniform unit directions (golden-angle spiral)."""
    index = np.arange(count)
    z = 1.0 - (2.0 * index + 1.0) / count
    radius = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    angle = index * np.pi * (3.0 - np.sqrt(5.0))
    return np.column_stack([radius * np.cos(angle), radius * np.sin(angle), z])


def _scan_directions(cfg):
    theta = np.radians(np.linspace(cfg.theta_min, cfg.theta_max, cfg.theta_count))
    phi = np.radians(cfg.phi)
    return np.column_stack([np.sin(theta) * np.cos(phi),
                            np.sin(theta) * np.sin(phi),
                            np.cos(theta)])


def _surface_samples(mesh, tri_signs, coefs, directions):
    """Current values where rays from the origin pierce the mesh.

    Also returns the hit points and the facet normals there, so analytic
    references can be evaluated at exactly the sampled locations.
    """
    values = np.zeros((len(directions), 3), dtype=np.complex128)
    points = np.zeros((len(directions), 3))
    normals = np.zeros((len(directions), 3))
    for row, direction in enumerate(directions):
        tri, point = mesh.first_ray_hit(np.zeros(3), direction)
        verts = mesh.tri_vertices[tri]
        slots = (tri_signs[tri][:, None] * (point[None, :] - verts)
                 / (2.0 * mesh.areas[tri]))
        values[row] = (coefs[mesh.tri_edges[tri]][:, None] * slots).sum(axis=0)
        points[row] = point
        normals[row] = mesh.normals[tri]
    return values, points, normals


def _sample_current(spaces, current, directions):
    if current.space is spaces.bc:
        fine_coefs = spaces.B @ current.coefficients
        return _surface_samples(spaces.fine, spaces.micro.tri_signs,
                                fine_coefs, directions)
    return _surface_samples(spaces.mesh, spaces.rwg.tri_signs,
                            current.coefficients, directions)


def _rel_l2(values, reference):
    scale = np.linalg.norm(reference)
    if scale == 0.0:
        return float("nan")
    return float(np.linalg.norm(values - reference) / scale)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(value):
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float):
        return repr(value)
    return value


def _write_manifest(cfg, out, command, extra=None):
    payload = {
        "command": command,
        "config": cfg.manifest_dict(),
        "versions": {
            "lovebem": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        payload.update(extra)
    (out / "manifest.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out_dir(cfg):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_reconstruction(cfg):
    """Exterior-field reconstruction errors for the four formulations."""
    cfg.validate()
    out = _out_dir(cfg)
    bench = Workbench(cfg)
    points = cfg.resolved_eval_radius() * _fibonacci_directions(cfg.eval_count)
    e_ref, _ = sources.dipole_fields(bench.spec, points)
    defined = int(np.linalg.norm(e_ref) > 0.0)

    rows = []
    for name in RECONSTRUCTION_SET:
        system, solution, kept = bench.solve(name)
        mag, ele = bench.current_pair(name, system, solution)
        e_num, _ = radiate(bench.gamma, mag, ele, points)
        rows.append((name, _rel_l2(e_num, e_ref), kept, defined))
    _write_csv(out / "reconstruction.csv",
               ["formulation", "rel_error", "kept", "defined"], rows)
    _write_manifest(cfg, out, "reconstruct")
    return rows


def run_love_check(cfg):
    """Magnetic-current moduli along the theta scan vs the analytic trace."""
    cfg.validate()
    out = _out_dir(cfg)
    bench = Workbench(cfg)
    directions = _scan_directions(cfg)
    theta = np.linspace(cfg.theta_min, cfg.theta_max, cfg.theta_count)

    columns = {}
    deviations = []
    reference = None
    for name in RECONSTRUCTION_SET:
        system, solution, _ = bench.solve(name)
        mag, _ele = bench.current_pair(name, system, solution)
        values, points, normals = _sample_current(bench.gamma, mag, directions)
        e_at, _ = sources.dipole_fields(bench.spec, points)
        ref = np.cross(normals, e_at)
        deviation = _rel_l2(values, ref)
        deviations.append((name, deviation, int(np.linalg.norm(ref) > 0.0)))
        columns[name] = np.linalg.norm(values, axis=1)
        if reference is None:
            # facet normals differ between the coarse and fine meshes, so
            # keep the reference sampled alongside the coarse currents
            reference = np.linalg.norm(ref, axis=1)

    header = ["theta_deg", "phi_deg", "reference", *RECONSTRUCTION_SET]
    rows = [
        (theta[i], cfg.phi, reference[i], *(columns[n][i] for n in RECONSTRUCTION_SET))
        for i in range(len(theta))
    ]
    _write_csv(out / "love_scan.csv", header, rows)
    _write_csv(out / "love_deviation.csv",
               ["formulation", "rel_l2_deviation", "defined"], deviations)
    _write_manifest(cfg, out, "love-check")
    return deviations


def run_interior_scan(cfg):
    """Normalized |E| of each formulation on the z=0 plane."""
    cfg.validate()
    out = _out_dir(cfg)
    bench = Workbench(cfg)

    extent = cfg.resolved_grid_extent()
    axis = np.linspace(-extent, extent, cfg.grid_count)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])
    rho = np.linalg.norm(points, axis=1)
    shell = cfg.resolved_shell_width()
    masked = np.abs(rho - cfg.source_radius) < shell
    interior = rho < cfg.source_radius - shell
    exterior = ~masked & ~interior
    live = ~masked

    e_ref, _ = sources.dipole_fields(bench.spec, points[live])
    ref_mag = np.full(len(points), np.nan)
    ref_mag[live] = np.linalg.norm(e_ref, axis=1)
    normalizer = np.nanmax(np.where(exterior[live], ref_mag[live], np.nan)) if exterior.any() else np.nan
    ref_field = np.zeros((len(points), 3), dtype=np.complex128)
    ref_field[live] = e_ref

    magnitudes = {}
    summary = []
    for name in RECONSTRUCTION_SET:
        system, solution, _ = bench.solve(name)
        mag, ele = bench.current_pair(name, system, solution)
        e_num, _ = radiate(bench.gamma, mag, ele, points[live])
        grid_mag = np.full(len(points), np.nan)
        grid_mag[live] = np.linalg.norm(e_num, axis=1)
        magnitudes[name] = grid_mag / normalizer
        full = np.zeros_like(ref_field)
        full[live] = e_num
        summary.append((
            name,
            float(np.mean(magnitudes[name][interior])) if interior.any() else float("nan"),
            _rel_l2(full[exterior], ref_field[exterior]),
        ))

    header = ["x", "y", "masked", "reference", *RECONSTRUCTION_SET]
    rows = [
        (points[i, 0], points[i, 1], int(masked[i]), ref_mag[i] / normalizer,
         *(magnitudes[n][i] for n in RECONSTRUCTION_SET))
        for i in range(len(points))
    ]
    _write_csv(out / "interior_scan.csv", header, rows)
    _write_csv(out / "interior_summary.csv",
               ["formulation", "interior_mean", "exterior_rel_error"], summary)
    _write_manifest(cfg, out, "interior-scan")
    return summary


def run_conditioning_sweep(cfg):
    """Truncated condition numbers of the four systems across the sweep."""
    cfg.validate()
    out = _out_dir(cfg)
    rows = []
    used_counts = set()
    for frequency in cfg.sweep:
        bench = Workbench(cfg, frequency=frequency)
        for name in CONDITIONING_SET:
            system = _BUILDERS[name](bench.suite, bench.spec)
            report = linalg.truncated_condition(system.matrix,
                                                cfg.conditioning_count)
            used_counts.add(report.used)
            rows.append((frequency, bench.k, name, report.value,
                         report.requested, report.used, int(report.clamped)))
    _write_csv(out / "conditioning.csv",
               ["frequency_hz", "wavenumber", "formulation", "condition",
                "requested", "used", "clamped"], rows)
    _write_manifest(cfg, out, "conditioning",
                    {"truncation_used": sorted(used_counts)})
    return rows


def run_cancellation(cfg):
    """Projected inverse-norm sweep of the two interior pairings."""
    cfg.validate()
    out = _out_dir(cfg)
    mesh = generate_sphere(cfg.source_radius, cfg.source_subdivisions)
    report = measure_cancellation(mesh, list(cfg.cancellation_ks))
    rows = [
        (report.ks[i], report.star_to_loop_norms[i],
         report.loop_to_star_norms[i], report.unprojected_norms[i])
        for i in range(len(report.ks))
    ]
    _write_csv(out / "cancellation.csv",
               ["wavenumber", "star_to_loop_norm", "loop_to_star_norm",
                "unprojected_norm"], rows)
    _write_manifest(cfg, out, "cancellation", {
        "slopes": {
            "star_to_loop": report.star_to_loop_slope,
            "loop_to_star": report.loop_to_star_slope,
            "unprojected": report.unprojected_slope,
        },
        "insufficient_points": report.insufficient_points,
    })
    return report


ASSEMBLABLE = ("gram", "t_rwg", "t_bc", "k_bc", "k_rwg",
               "t_rwg_m", "t_bc_m", "k_bc_m", "k_rwg_m",
               "inner_bc", "inner_rwg")


def run_assemble(cfg, block):
    """Dump one kernel block or one system matrix for golden comparisons."""
    cfg.validate()
    out = _out_dir(cfg)
    bench = Workbench(cfg)
    if block in ASSEMBLABLE:
        matrix = getattr(bench.suite, block)
    elif block in _BUILDERS:
        matrix = _BUILDERS[block](bench.suite, bench.spec).matrix
    else:
        raise ConfigError(
            f"unknown block {block!r}; choose from {ASSEMBLABLE + tuple(_BUILDERS)}")
    np.save(out / f"{block}.npy", matrix)
    _write_manifest(cfg, out, "assemble", {"block": block,
                                           "shape": list(matrix.shape)})
    return matrix


def with_output(cfg, out_dir):
    """Copy of the config pointing at a different output directory."""
    return replace(cfg, out_dir=str(out_dir))
