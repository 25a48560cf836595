import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any

from cascade import (
    dynamic_compensator,
    find_reduction,
    flat_outputs_and_solution,
    prolong_and_linearize,
    prolongation_plan,
    refine_plan,
)
from contact import ContactTransformation, contact_coordinates
from errors import IntegralSearchExhausted, NotStaticFeedbackLinearizable, ReductionNotSFL
from flags import refined_derived_type, vel_decel
from geometry import ControlSystem
from goursat import GoursatVerdict, goursat_test, relative_goursat_test, sfl_test
from models import PlanRecord, Report, SplitRecord, Verdict
from symmetry import (
    QuotientData,
    SubConnection,
    SymmetryAlgebra,
    check_control_admissible,
    quotient_system,
    trivialize,
    verify_trivialization,
)
from system_file import SystemFile, format_expr

logger = logging.getLogger(__name__)


@dataclass
class RunOptions:
    """Per-run overrides of the configuration"""

    seed: int | None = None
    degree_budget: int | None = None
    mode: str | None = None
    split: list[str] | None = None
    refine: bool = False


@dataclass
class TaskContext:
    """What a run has computed so far; later pipeline stages reuse earlier ones"""

    spec: SystemFile
    options: RunOptions
    report: Report
    system: ControlSystem | None = None
    gamma: SymmetryAlgebra | None = None
    quotient: QuotientData | None = None
    phi: ContactTransformation | None = None
    subconnection: SubConnection | None = None
    stopped: bool = False  # a negative verdict ended the pipeline early

    def control_system(self) -> ControlSystem:
        if self.system is None:
            self.system = self.spec.system()
            self.system.check_regular()
        return self.system

    def note(self, message: str):
        logger.info(message)
        self.report.notes.append(message)


def verdict_record(name: str, verdict: GoursatVerdict) -> Verdict:
    holds = verdict.is_sfl if verdict.is_sfl is not None else verdict.is_goursat
    return Verdict(
        name=name,
        holds=bool(holds),
        signature=str(verdict.signature),
        refined_type=verdict.refined_type.as_lists() if verdict.refined_type else None,
        velocity=str(verdict.velocity) if verdict.velocity is not None else None,
        failures=list(verdict.failures),
        conditions=dict(verdict.conditions),
    )


def printed(mapping: dict) -> dict[str, str]:
    return {str(k): format_expr(v) for k, v in mapping.items()}


def equations_record(C: ControlSystem) -> dict[str, str]:
    return {f"{x}'": format_expr(f) for x, f in zip(C.states, C.drift, strict=True)}


def transformation_record(phi: ContactTransformation) -> dict[str, str]:
    return {s.name: format_expr(phi.components[s]) for s in phi.brunovsky.chart.symbols}


class Task(ABC):
    """Abstract base class for all toolkit verbs"""

    @abstractmethod
    def get_task_definition(self) -> dict[str, Any]:
        """Return the name and description of this task"""
        pass

    @abstractmethod
    def execute(self, ctx: TaskContext):
        """Run the task, filling ctx.report"""
        pass


class AnalyzeTask(Task):
    """Derived flag, refined derived type, vel/decel and the Goursat verdict"""

    def get_task_definition(self) -> dict[str, Any]:
        return {
            "name": "analyze",
            "description": "Derived flag invariants and Goursat test of the system distribution",
        }

    def execute(self, ctx: TaskContext):
        spec = ctx.spec
        if spec.has_system:
            C = ctx.control_system()
        else:
            C = spec.subconnection().system
        D = C.distribution
        verdict = goursat_test(D, drift=C.drift_field)
        flag = verdict.flag
        velocity, decel = vel_decel(flag)
        ctx.report.signatures["vel"] = str(velocity)
        ctx.report.signatures["decel"] = str(decel)
        ctx.report.signatures["ranks"] = str(flag.ranks)
        ctx.report.verdicts.append(
            Verdict(
                name="derived type",
                holds=flag.reaches_tangent_bundle,
                refined_type=refined_derived_type(flag).as_lists(),
                velocity=str(velocity),
                signature=str(decel),
            )
        )
        ctx.report.verdicts.append(verdict_record("goursat", verdict))


class SflTask(Task):
    """Static feedback linearizability and linearizing contact coordinates"""

    def get_task_definition(self) -> dict[str, Any]:
        return {
            "name": "sfl",
            "description": "SFL test and, when it passes, the linearizing contact coordinates",
        }

    def execute(self, ctx: TaskContext):
        C = ctx.control_system()
        verdict = sfl_test(C)
        ctx.report.verdicts.append(verdict_record("sfl", verdict))
        if not verdict.is_sfl:
            ctx.stopped = True
            return
        ctx.report.signatures["kappa"] = str(verdict.signature)
        phi = contact_coordinates(
            C,
            ctx.spec.names or None,
            candidates=ctx.spec.candidates or None,
            degree_budget=ctx.options.degree_budget,
            verdict=verdict,
        )
        ctx.phi = phi
        ctx.report.transformations["contact"] = transformation_record(phi)
        ctx.report.transformations["fundamental"] = {
            ff.name: format_expr(ff.expr) for ff in phi.fundamental
        }


class QuotientTask(Task):
    """Control admissibility, relative Goursat test and the quotient control system"""

    def get_task_definition(self) -> dict[str, Any]:
        return {
            "name": "quotient",
            "description": "Quotient of the system by its symmetry algebra and its SFL verdict",
        }

    def execute(self, ctx: TaskContext):
        C = ctx.control_system()
        gamma = ctx.spec.symmetry_algebra(C)
        if gamma is None:
            raise ValueError(f"{ctx.spec.name} declares no symmetry block")
        ctx.gamma = gamma
        report = check_control_admissible(C, gamma)
        ctx.report.verdicts.append(
            Verdict(
                name="control admissible",
                holds=report.admissible,
                failures=report.failures,
                conditions=report.conditions,
            )
        )
        if not report.admissible:
            ctx.stopped = True
            return
        relative = relative_goursat_test(C, gamma.distribution)
        ctx.report.verdicts.append(verdict_record("relative goursat", relative))
        ctx.report.signatures["relative"] = str(relative.signature)
        quotient = quotient_system(
            C,
            gamma,
            ctx.spec.invariants or None,
            degree_budget=ctx.options.degree_budget,
        )
        ctx.quotient = quotient
        ctx.report.transformations["invariants"] = printed(quotient.invariants)
        ctx.report.systems["quotient"] = equations_record(quotient.system)
        verdict = sfl_test(quotient.system)
        ctx.report.verdicts.append(verdict_record("quotient sfl", verdict))
        if not verdict.is_sfl:
            ctx.stopped = True


class SubconnectionTask(Task):
    """Contact sub-connection of a system with symmetry, computed or verified"""

    def __init__(self, quotient: QuotientTask):
        self.quotient = quotient

    def get_task_definition(self) -> dict[str, Any]:
        return {
            "name": "subconnection",
            "description": "Trivialization of the system onto its contact sub-connection",
        }

    def execute(self, ctx: TaskContext):
        spec = ctx.spec
        if spec.map:
            H = self._verified(ctx)
        elif spec.has_system:
            H = self._computed(ctx)
        else:
            H = spec.subconnection()
            ctx.note("sub-connection given directly; no original system")
        if H is None:
            return
        ctx.subconnection = H
        ctx.report.signatures["kappa"] = str(H.signature)
        ctx.report.transformations["lambda"] = printed(H.lambdas)
        ctx.report.systems["subconnection"] = equations_record(H.system)
        if H.trivialization is not None:
            ctx.report.transformations["trivialization"] = printed(H.trivialization.components)

    def _verified(self, ctx: TaskContext) -> SubConnection:
        C = ctx.control_system()
        gamma = ctx.spec.symmetry_algebra(C)
        ctx.gamma = gamma
        H = verify_trivialization(C, gamma, ctx.spec.map, ctx.spec.subconnection())
        ctx.report.verdicts.append(Verdict(name="trivialization", holds=True))
        return H

    def _computed(self, ctx: TaskContext) -> SubConnection | None:
        self.quotient.execute(ctx)
        if ctx.stopped:
            return None
        quotient = ctx.quotient
        phi = contact_coordinates(
            quotient.system,
            ctx.spec.names or None,
            degree_budget=ctx.options.degree_budget,
        )
        ctx.phi = phi
        ctx.report.transformations["quotient contact"] = transformation_record(phi)
        epsilon = ctx.spec.epsilon
        H = trivialize(
            ctx.control_system(),
            ctx.gamma,
            quotient,
            phi,
            list(epsilon.values()) or None,
            list(epsilon) or None,
        )
        H.check_normal_form()
        ctx.report.verdicts.append(Verdict(name="trivialization", holds=True))
        return H


class CascadeTask(Task):
    """Reduction, prolongation, dynamic compensator, flat outputs and explicit solution"""

    def __init__(self, subconnection: SubconnectionTask):
        self.subconnection = subconnection

    def get_task_definition(self) -> dict[str, Any]:
        return {
            "name": "cascade",
            "description": "Cascade feedback linearization through to the explicit solution",
        }

    def execute(self, ctx: TaskContext):
        self.subconnection.execute(ctx)
        H = ctx.subconnection
        if ctx.stopped or H is None:
            return
        options = ctx.options
        split = options.split or ctx.spec.split()
        analysis, attempts = find_reduction(
            H, [split] if split else None, degree_budget=options.degree_budget
        )
        ctx.report.splits = [
            SplitRecord(split=a.split, is_sfl=a.is_sfl, reason=a.reason) for a in attempts
        ]
        if analysis is None:
            ctx.report.verdicts.append(Verdict(name="cascade", holds=False))
            ctx.note(ReductionNotSFL.condition)
            ctx.stopped = True
            return
        ctx.report.verdicts.append(verdict_record("reduced sfl", analysis.verdict))
        ctx.report.signatures["kappa_bar"] = str(analysis.kappa_bar)
        if analysis.transformation is not None:
            ctx.report.transformations["reduced fundamental"] = {
                ff.name: format_expr(ff.expr) for ff in analysis.transformation.fundamental
            }
        if analysis.note:
            ctx.note(f"exact plan unavailable: {analysis.note}")

        plan = prolongation_plan(analysis, options.mode)
        if plan.mode == "bound" and (options.refine or ctx.spec.flag("refine")):
            ctx.report.signatures["bound nu'"] = str(plan.nu_prime)
            plan = refine_plan(H, plan)
        ctx.report.plan = PlanRecord(
            mode=plan.mode,
            base=plan.base,
            orders=plan.orders,
            nu=str(plan.nu),
            nu_prime=str(plan.nu_prime),
            kappa_bar=str(plan.kappa_bar),
            k_bar=plan.k_bar,
            expected_signature=str(plan.expected_signature()),
            joined=str(plan.joined) if plan.joined is not None else None,
            refined=plan.refined,
            dimensions_ok=plan.check_dimensions(H),
        )
        linearize = ctx.spec.option("linearize", "true").lower() != "false"
        prolonged = prolong_and_linearize(
            H, plan, linearize=linearize, degree_budget=options.degree_budget
        )
        ctx.report.verdicts.append(verdict_record("prolonged sfl", prolonged.verdict))
        ctx.report.signatures["kappa_prime"] = str(prolonged.verdict.signature)
        if prolonged.transformation is not None:
            ctx.report.transformations["prolonged contact"] = transformation_record(
                prolonged.transformation
            )
        if prolonged.note:
            ctx.note(f"contact coordinates of the prolongation unavailable: {prolonged.note}")
        if H.trivialization is None:
            ctx.note("no trivialization of an original system; stopping after prolongation")
            ctx.report.verdicts.append(Verdict(name="cascade", holds=True))
            return

        compensator = dynamic_compensator(ctx.control_system(), H, plan)
        ctx.report.compensator = printed(compensator.beta)
        augmented = compensator.system
        ctx.report.systems["augmented"] = equations_record(augmented)
        ctx.report.verdicts.append(verdict_record("augmented sfl", compensator.verdict))
        try:
            flat = flat_outputs_and_solution(
                compensator, options.degree_budget, candidates=ctx.spec.candidates or None
            )
        except (NotStaticFeedbackLinearizable, IntegralSearchExhausted) as exc:
            ctx.note(f"flat outputs unavailable: {exc}")
        else:
            ctx.report.flat_outputs = [format_expr(e) for e in flat.outputs]
            if flat.solution is not None:
                ctx.report.solution = printed(flat.solution.values)
                ctx.report.signatures["solution"] = str(flat.solution.signature)
            if flat.note:
                ctx.note(flat.note)
        ctx.report.verdicts.append(Verdict(name="cascade", holds=True))


class TaskManager:
    """Manages the available toolkit verbs"""

    def __init__(self):
        self.tasks = {}

    def register_task(self, task: Task):
        """Register any task that implements the Task interface"""
        task_def = task.get_task_definition()
        task_name = task_def.get("name")
        if not task_name:
            raise ValueError("Task must have a 'name' in its definition")
        self.tasks[task_name] = task

    def get_task_definitions(self) -> list:
        return [task.get_task_definition() for task in self.tasks.values()]

    def execute_task(self, task_name: str, ctx: TaskContext):
        """Execute a task by name on a prepared context"""
        if task_name not in self.tasks:
            raise ValueError(f"Task '{task_name}' not found")
        logger.info("running %s on %s", task_name, ctx.spec.name)
        return self.tasks[task_name].execute(ctx)
