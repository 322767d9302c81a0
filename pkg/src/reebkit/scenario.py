"""Scenario files: a model, named objects and a task list, run in order.

A scenario is a YAML mapping (see ``docs/scenario-format.md`` for the
grammar). Loading validates everything it can before any task runs: unknown
task names, unknown argument names and references to undeclared objects are
rejected with the line they occur on.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping

import yaml

from . import construct as C
from . import expr as ex
from . import verify as V
from .exterior import Chart, KForm, VecField, contract, d, wedge
from .manifold import (
    ChartComplex,
    as_complex,
    builtin_carriere,
    builtin_local_chart,
    builtin_t3_contact,
    builtin_trivial_open_book,
    check_descends,
    periodic_identifications,
)
from .pointwise import ranks
from .properties import SUITES, run_suite
from .report import FAIL, PASS, VerificationReport, _clean

__all__ = [
    "ScenarioError",
    "Scenario",
    "Task",
    "TASKS",
    "MODELS",
    "load_scenario",
    "builtin_scenarios",
    "resolve_target",
    "run_scenario",
    "record_line",
]

EXPECTATIONS = ("pass", "fail", "inconclusive", "rejected", "error")


class ScenarioError(ValueError):
    """Parse or validation error, carrying the source name and 1-based line."""

    def __init__(self, msg: str, source: str = "<scenario>", line: int | None = None):
        self.msg, self.source, self.line = msg, source, line
        loc = f"{source}:{line}" if line else source
        super().__init__(f"{loc}: {msg}")


# -- YAML with line numbers ---------------------------------------------------


class _Map(dict):
    line: int = 0


class _Loader(yaml.SafeLoader):
    pass


def _construct_map(loader, node):
    loader.flatten_mapping(node)
    out = _Map(loader.construct_pairs(node, deep=True))
    out.line = node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_map)


def _line(node, default=None):
    return getattr(node, "line", default)


# -- models -------------------------------------------------------------------


def _carriere_namespace(A=((2, 1), (1, 1))):
    m = builtin_carriere(tuple(tuple(int(v) for v in row) for row in A))
    objs = dict(m.complex.declared)
    objs.update(mu1=m.mu1, mu2=m.mu2, v1=m.v1, v2=m.v2)
    return m, objs


def _open_book_namespace():
    ob = builtin_trivial_open_book()
    return ob, dict(ob.complex.declared)


def _t3_namespace():
    cc, _ = builtin_t3_contact()
    return cc, dict(cc.declared)


def _local_namespace(dim):
    def make():
        return builtin_local_chart(dim), {}
    return make


MODELS: dict[str, tuple[Callable, str]] = {
    "carriere": (_carriere_namespace, "mapping torus T^3_A with the eigen-forms alpha1, alpha2"),
    "local-chart-3": (_local_namespace(3), "unit box with coordinates x, y, z"),
    "local-chart-5": (_local_namespace(5), "unit box with coordinates x1..x5"),
    "t3-contact": (_t3_namespace, "3-torus with cos(2 pi z) dx - sin(2 pi z) dy"),
    "trivial-open-book": (_open_book_namespace, "S^3 as tube B x D^2 plus page bundle D^2 x S^1"),
}


def _inline_model(spec, source):
    charts = {}
    for c in spec.get("charts", []):
        try:
            coords = tuple(c["coords"])
            dom = tuple(tuple(b) for b in c.get("domain", ())) or ()
            chart = Chart(c["name"], coords, dom, dict(c.get("periods", {})))
        except (KeyError, TypeError, ValueError) as err:
            raise ScenarioError(f"bad chart definition: {err}", source, _line(c)) from None
        charts[chart.name] = chart
    if not charts:
        raise ScenarioError("inline model needs at least one chart", source, _line(spec))
    idents = [i for ch in charts.values() for i in periodic_identifications(ch)]
    params = {str(k): float(v) for k, v in spec.get("params", {}).items()}
    return ChartComplex(charts=charts, identifications=idents, params=params, name="inline"), {}


# -- scenario data --------------------------------------------------------------


@dataclass
class Task:
    id: str
    kind: str
    args: dict[str, Any]
    expect: str = "pass"
    line: int | None = None


@dataclass
class Scenario:
    name: str
    description: str
    model_name: str
    model: Any
    objects: dict[str, Any]
    tasks: list[Task]
    grid: int | None = None
    tol: float | None = None
    source: str = "<scenario>"


# -- object definitions -----------------------------------------------------------


def _parse_expr(text, chart: Chart, source, line):
    try:
        return chart.parse(str(text))
    except ex.ParseError as err:
        raise ScenarioError(f"bad expression {text!r}: {err}", source, line) from None


def _chart_for(model, name, source, line) -> Chart:
    cc = as_complex(model)
    if name is None:
        return next(iter(cc.charts.values()))
    try:
        return cc.chart(name)
    except KeyError:
        raise ScenarioError(f"unknown chart {name!r}", source, line) from None


def _form_from_spec(spec, model, source) -> KForm:
    line = _line(spec)
    chart = _chart_for(model, spec.get("chart"), source, line)
    coeffs = spec.get("coeffs")
    if not isinstance(coeffs, Mapping) or not coeffs:
        raise ScenarioError("form needs a non-empty 'coeffs' mapping", source, line)
    table, degree = {}, None
    for key, val in coeffs.items():
        key = str(key).strip()
        names = () if key == "1" else tuple(p.strip() for p in key.split("^"))
        if any(not n.startswith("d") for n in names):
            raise ScenarioError(f"form key {key!r} must look like 'dx^dy' (or '1')", source, line)
        names = tuple(n[1:] for n in names)
        for n in names:
            if n not in chart.coords:
                raise ScenarioError(f"{n!r} is not a coordinate of chart {chart.name!r}", source, line)
        if degree is None:
            degree = len(names)
        elif degree != len(names):
            raise ScenarioError("all keys of a form must have the same degree", source, line)
        table[names] = _parse_expr(val, chart, source, line)
    return KForm(chart, degree, table)


def _field_from_spec(spec, model, source) -> VecField:
    line = _line(spec)
    chart = _chart_for(model, spec.get("chart"), source, line)
    comps = spec.get("comps")
    if not isinstance(comps, Mapping):
        raise ScenarioError("field needs a 'comps' mapping", source, line)
    for k in comps:
        if k not in chart.coords:
            raise ScenarioError(f"{k!r} is not a coordinate of chart {chart.name!r}", source, line)
    return VecField(chart, {k: _parse_expr(v, chart, source, line) for k, v in comps.items()})


def _define(name, spec, model, objs, source):
    line = _line(spec)
    if not isinstance(spec, Mapping) or len(spec) != 1:
        raise ScenarioError(f"object {name!r} needs exactly one of: form, field, d, wedge, combo, contract",
                            source, line)
    (kind, arg), = spec.items()

    def ref(n):
        if n not in objs:
            raise ScenarioError(f"object {name!r} refers to undeclared object {n!r}", source, line)
        return objs[n]

    if kind == "form":
        return _form_from_spec(arg, model, source)
    if kind == "field":
        return _field_from_spec(arg, model, source)
    if kind == "d":
        return d(ref(arg))
    if kind == "wedge":
        a, b = (ref(n) for n in arg)
        return wedge(a, b)
    if kind == "contract":
        v, a = (ref(n) for n in arg)
        return contract(v, a)
    if kind == "combo":
        out = None
        for n, coef in arg.items():
            obj = ref(n)
            term = obj * _parse_expr(coef, obj.chart, source, line)
            out = term if out is None else out + term
        return out
    raise ScenarioError(f"unknown object kind {kind!r}", source, line)


# -- tasks ------------------------------------------------------------------------

# argument kinds: "obj" (declared object name), "num", "str", "map", "seq"


@dataclass(frozen=True)
class TaskSpec:
    run: Callable
    required: dict[str, str]
    optional: dict[str, str] = field(default_factory=dict)
    help: str = ""


def _t_check(fn):
    def run(ctx, form, **kw):
        return fn(form, ctx.model, ctx.grid, **kw)
    return run


def _t_residual_check(fn):
    def run(ctx, form, **kw):
        return fn(form, ctx.model, ctx.grid, **ctx.tol_kw, **kw)
    return run


def _t_connection(ctx, form, field):
    return V.is_connection(form, field, ctx.model, ctx.grid, **ctx.tol_kw)


def _t_descends(ctx, object):
    return check_descends(object, ctx.model, ctx.grid_n, **ctx.tol_kw)


def _t_basic(ctx, omega, primitive, field):
    return V.basic_exactness_witness(omega, primitive, field, ctx.model, ctx.grid, **ctx.tol_kw)


def _t_kernel(ctx, form, field):
    return V.kernel_alignment(form, field, ctx.model, ctx.grid)


def _t_identity(ctx, lhs, rhs):
    return V.forms_agree(lhs, rhs, ctx.model, ctx.grid, **ctx.tol_kw)


def _t_reeb(ctx, form, field):
    return V.reeb_agrees(form, field, ctx.model, ctx.grid)


def _t_rank(ctx, form, rank):
    g = as_complex(ctx.model).grid(form.chart, n=ctx.grid)
    pts = g.points()
    r = ranks(form, pts, as_complex(ctx.model).params)
    bad = r != int(rank)
    i = int(bad.argmax()) if bad.any() else 0
    return VerificationReport(
        FAIL if bad.any() else PASS, f"rank = {int(rank)}", -float(bad.sum()),
        residuals={"points_with_other_rank": float(bad.sum())},
        witness_points=[{k: float(v[i]) for k, v in pts.items()}],
        grid=g.metadata(), details={"min_rank": int(r.min()), "max_rank": int(r.max())})


def _deformation_report(res: C.DeformationResult, param_name: str) -> VerificationReport:
    rep = res.report
    rep.details[param_name] = res.parameter
    rep.details["threshold"] = res.threshold
    rep.details["search_trace"] = res.trace
    if res.form is not None:
        rep.details["form"] = res.form.to_dict()
    return rep


def _t_contactize(ctx, phi, eta, reeb=None):
    return _deformation_report(C.contactize(phi, eta, ctx.model, ctx.grid, reeb=reeb), "K")


def _t_confoliation(ctx, alpha, eta):
    return _deformation_report(C.confoliation_contactize(alpha, eta, ctx.model, ctx.grid), "eps")


def _t_carriere(ctx, eps):
    form, rep = C.carriere_contact(ctx.model, float(eps), ctx.grid)
    rep.details["form"] = form.to_dict()
    return rep


def _t_glue(ctx, band=None, layout="split"):
    cfg = C.GlueConfig(band=tuple(band) if band else (0.25, 0.75), layout=layout)
    return C.glue_open_book(ctx.model, cfg, ctx.grid_n).report


def _t_demo(ctx):
    return C.assemble_geodesible_demo(ctx.grid_n)


def _t_orbit(ctx, field, form, seed, max_time=100.0, integral=None):
    res = V.orbit_integral(field, form, {k: float(v) for k, v in seed.items()}, ctx.model, max_time=float(max_time))
    details = res.to_dict()
    verdict = res.verdict
    residuals = {"closure": res.closure_residual}
    margin = res.closure_tol - res.closure_residual
    if integral is not None and res.closed:
        target = float(ex.evaluate(ex.parse(str(integral)), {}))
        err = abs(res.integral - target)
        residuals["integral"] = err
        margin = min(margin, 1e-6 - err)
        if err >= 1e-6:
            verdict = FAIL
    return VerificationReport(verdict, "closed orbit", margin, residuals=residuals,
                              witness_points=[dict(seed)], details=details)


def _t_properties(ctx, suite, instances=None):
    if suite not in SUITES:
        raise ValueError(f"unknown property suite {suite!r}; known: {sorted(SUITES)}")
    r = run_suite(suite, seed=ctx.seed, instances=None if instances is None else int(instances))
    return VerificationReport(PASS if r.passed else FAIL, f"property suite {suite}", r.tol - r.max_residual,
                              residuals={"max": r.max_residual},
                              witness_points=[{"instance": float(r.worst_instance)}], details=r.to_dict())


TASKS: dict[str, TaskSpec] = {
    "basic_exactness": TaskSpec(_t_basic, {"omega": "obj", "primitive": "obj", "field": "obj"},
                                help="primitive is basic for the field and d(primitive) = omega"),
    "carriere_contact": TaskSpec(_t_carriere, {"eps": "num"}, help="alpha1 + eps alpha2 on the mapping torus"),
    "confoliation_contactize": TaskSpec(_t_confoliation, {"alpha": "obj", "eta": "obj"},
                                        help="largest eps with alpha + eps eta contact"),
    "contactize": TaskSpec(_t_contactize, {"phi": "obj", "eta": "obj"}, {"reeb": "obj"},
                           help="smallest K with K phi + eta contact"),
    "descends": TaskSpec(_t_descends, {"object": "obj"}, help="object is compatible with every identification"),
    "geodesible_demo": TaskSpec(_t_demo, {}, help="binding -> gluing -> orbit -> basic class pipeline"),
    "glue_open_book": TaskSpec(_t_glue, {}, {"band": "seq", "layout": "str"}, help="extend the binding connection"),
    "identity": TaskSpec(_t_identity, {"lhs": "obj", "rhs": "obj"}, help="two forms agree on the grid"),
    "is_confoliation": TaskSpec(_t_check(V.is_confoliation), {"form": "obj"}, help="alpha ^ (d alpha)^n >= 0"),
    "is_connection": TaskSpec(_t_connection, {"form": "obj", "field": "obj"}, help="eta(V) = 1, i_V d eta = 0"),
    "is_contact": TaskSpec(_t_check(V.is_contact), {"form": "obj"}, help="alpha ^ (d alpha)^n > 0"),
    "is_presymplectic": TaskSpec(_t_residual_check(V.is_presymplectic), {"form": "obj"},
                                 help="closed 2-form of maximal rank"),
    "is_presymplectic_confoliation": TaskSpec(_t_check(V.is_presymplectic_confoliation), {"form": "obj"},
                                              help="confoliation with presymplectic d alpha"),
    "kernel_alignment": TaskSpec(_t_kernel, {"form": "obj", "field": "obj"},
                                 help="kernel line of a 2-form is spanned by the field"),
    "orbit": TaskSpec(_t_orbit, {"field": "obj", "form": "obj", "seed": "map"},
                      {"max_time": "num", "integral": "str"}, help="closed orbit and its line integral"),
    "property_suite": TaskSpec(_t_properties, {"suite": "str"}, {"instances": "num"},
                               help="random identity checks (uses --seed)"),
    "rank": TaskSpec(_t_rank, {"form": "obj", "rank": "num"}, help="2-form has the given rank everywhere"),
    "reeb_field": TaskSpec(_t_reeb, {"form": "obj", "field": "obj"}, help="Reeb field of a contact form"),
}


# -- loading ----------------------------------------------------------------------


def _scenario_dir():
    return resources.files("reebkit") / "scenarios"


def builtin_scenarios() -> dict[str, str]:
    """Name -> one-line description, alphabetized."""
    out = {}
    for entry in _scenario_dir().iterdir():
        if entry.name.endswith(".scn"):
            data = yaml.safe_load(entry.read_text()) or {}
            out[entry.name[:-4]] = str(data.get("description", "")).strip().splitlines()[0] if data.get(
                "description") else ""
    return dict(sorted(out.items()))


def resolve_target(target: str) -> tuple[str, str]:
    """``(text, source)`` for a built-in scenario name or a file path."""
    entry = _scenario_dir() / f"{target}.scn"
    if "/" not in target and not target.endswith(".scn") and entry.is_file():
        return entry.read_text(), f"{target}.scn"
    path = Path(target)
    try:
        return path.read_text(), str(path)
    except OSError as err:
        raise ScenarioError(f"cannot read scenario: {err.strerror or err}", str(path)) from None


def load_scenario(text: str, source: str = "<scenario>") -> Scenario:
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        raise ScenarioError(f"YAML error: {getattr(err, 'problem', None) or err}", source,
                            mark.line + 1 if mark else None) from None
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario must be a mapping", source, 1)
    known = {"name", "description", "model", "grid", "tol", "objects", "tasks"}
    for k in data:
        if k not in known:
            raise ScenarioError(f"unknown top-level key {k!r}", source, _line(data))

    model_spec = data.get("model")
    if model_spec is None:
        raise ScenarioError("missing 'model'", source, _line(data))
    if isinstance(model_spec, str):
        if model_spec not in MODELS:
            raise ScenarioError(f"unknown model {model_spec!r}; known: {sorted(MODELS)}", source, _line(data))
        model, objs = MODELS[model_spec][0]()
        model_name = model_spec
    elif isinstance(model_spec, Mapping) and "builtin" in model_spec:
        name = model_spec["builtin"]
        if name not in MODELS:
            raise ScenarioError(f"unknown model {name!r}; known: {sorted(MODELS)}", source, _line(model_spec))
        opts = {k: v for k, v in model_spec.items() if k != "builtin"}
        try:
            model, objs = MODELS[name][0](**opts)
        except (TypeError, ValueError) as err:
            raise ScenarioError(f"bad options for model {name!r}: {err}", source, _line(model_spec)) from None
        model_name = name
    elif isinstance(model_spec, Mapping):
        model, objs = _inline_model(model_spec, source)
        model_name = "inline"
    else:
        raise ScenarioError("'model' must be a name or a mapping", source, _line(data))

    objects = data.get("objects") or {}
    if not isinstance(objects, Mapping):
        raise ScenarioError("'objects' must be a mapping", source, _line(data))
    for name, spec in objects.items():
        try:
            objs[str(name)] = _define(str(name), spec, model, objs, source)
        except ScenarioError:
            raise
        except (KeyError, ValueError, TypeError) as err:
            raise ScenarioError(f"object {name!r}: {err}", source, _line(spec, _line(objects))) from None

    tasks = []
    raw_tasks = data.get("tasks") or []
    if not isinstance(raw_tasks, list):
        raise ScenarioError("'tasks' must be a list", source, _line(data))
    seen = set()
    for i, t in enumerate(raw_tasks):
        line = _line(t)
        if not isinstance(t, Mapping) or "task" not in t:
            raise ScenarioError(f"task #{i + 1} needs a 'task' key", source, line)
        kind = t["task"]
        if kind not in TASKS:
            raise ScenarioError(f"unknown task {kind!r}", source, line)
        spec = TASKS[kind]
        tid = str(t.get("id", f"{i + 1:02d}-{kind}"))
        if tid in seen:
            raise ScenarioError(f"duplicate task id {tid!r}", source, line)
        seen.add(tid)
        expect = t.get("expect", "pass")
        if expect not in EXPECTATIONS:
            raise ScenarioError(f"expect must be one of {EXPECTATIONS}, got {expect!r}", source, line)
        args = {k: v for k, v in t.items() if k not in ("task", "id", "expect")}
        for k in spec.required:
            if k not in args:
                raise ScenarioError(f"task {kind!r} needs argument {k!r}", source, line)
        for k, v in args.items():
            kinds = {**spec.required, **spec.optional}
            if k not in kinds:
                raise ScenarioError(f"task {kind!r} has no argument {k!r}", source, line)
            if kinds[k] == "obj" and v not in objs:
                raise ScenarioError(f"task {tid!r} references undeclared object {v!r}", source, line)
            if kinds[k] == "num" and not isinstance(v, (int, float)):
                raise ScenarioError(f"argument {k!r} must be a number", source, line)
            if kinds[k] == "map" and not isinstance(v, Mapping):
                raise ScenarioError(f"argument {k!r} must be a mapping", source, line)
        tasks.append(Task(tid, kind, args, expect, line))

    grid = data.get("grid")
    tol = data.get("tol")
    return Scenario(
        name=str(data.get("name", Path(source).stem)),
        description=str(data.get("description", "")).strip(),
        model_name=model_name,
        model=model,
        objects=objs,
        tasks=tasks,
        grid=int(grid) if grid is not None else None,
        tol=float(tol) if tol is not None else None,
        source=source,
    )


# -- running ----------------------------------------------------------------------


@dataclass
class _Context:
    model: Any
    grid: int | None
    tol: float | None
    seed: int

    @property
    def grid_n(self):
        return self.grid

    @property
    def tol_kw(self):
        return {} if self.tol is None else {"tol": self.tol}


def _resolve_args(task: Task, objs) -> dict:
    spec = TASKS[task.kind]
    kinds = {**spec.required, **spec.optional}
    return {k: objs[v] if kinds[k] == "obj" else v for k, v in task.args.items()}


def run_task(scn: Scenario, task: Task, ctx: _Context) -> dict:
    try:
        rep = TASKS[task.kind].run(ctx, **_resolve_args(task, scn.objects))
        verdict, body = rep.verdict, rep.to_dict()
    except C.RejectedInput as err:
        verdict = "rejected"
        body = {"rejected_check": err.check, "message": str(err),
                "report": err.report.to_dict() if err.report is not None else None}
    except (C.GlueConfigError, ValueError, KeyError, ArithmeticError) as err:
        verdict = "error"
        body = {"error": f"{type(err).__name__}: {err}"}
    return {
        "scenario": scn.name,
        "task": task.id,
        "kind": task.kind,
        "line": task.line,
        "expect": task.expect,
        "verdict": verdict,
        "ok": verdict == task.expect,
        "margin": body.get("margin"),
        "report": body,
    }


def run_scenario(scn: Scenario, grid: int | None = None, tol: float | None = None, seed: int = 0) -> list[dict]:
    """Run every task; ``grid``/``tol`` override the scenario's own settings.

    Without any grid setting the chart default applies (``REEBKIT_GRID`` or
    the per-dimension default).
    """
    ctx = _Context(scn.model, grid if grid is not None else scn.grid, tol if tol is not None else scn.tol, seed)
    return [run_task(scn, t, ctx) for t in scn.tasks]


def record_line(record: dict) -> str:
    return json.dumps(_clean(record), sort_keys=True)
