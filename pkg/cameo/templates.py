from typing import List, Sequence, Tuple

from jinja2 import Template

from .schema import (
    AggregateReport,
    EvaluationReport,
    MultiCertRow,
    PreventionRow,
    SweepResult,
    SyntheticCorpus,
)

DETECT_SUMMARY_TEMPLATE = Template("""{% for course, counts in report.per_course.items() -%}
  {{ "%-24s"|format(course) }} certified {{ "%6d"|format(counts.certified_count) }}   cameo {{ "%5d"|format(counts.cameo_count) }}   ({{ "%.2f"|format(100 * counts.cameo_fraction) }}%)
{% endfor -%}
{% if not report.per_course %}  (no courses)
{% endif -%}
Candidate pairs classified: {{ candidates }}
CAMEO certificates: {{ report.cameo_certificates }} of {{ report.total_certificates }} ({{ "%.2f"|format(100 * report.cameo_fraction_overall) }}%)
Unique CAMEO users: {{ report.unique_cameo_users }}, harvester accounts: {{ report.harvester_accounts }}
Courses with CAMEO: {{ report.courses_with_cameo }}{% if report.courses_with_cameo %} ({{ "%.2f"|format(100 * report.cameo_fraction_affected_courses) }}% of their certificates){% endif %}
""")

SYNTH_SUMMARY_TEMPLATE = Template("""Courses: {{ corpus.metadata|length }}{% if corpus.truth.prevention_courses %} ({{ corpus.truth.prevention_courses|join(', ') }} with answer prevention){% endif %}
Events: {{ corpus.events|length }}
Accounts: {{ corpus.truth.labels|length }} ({{ masters }} CAMEO masters, {{ harvesters }} harvesters)
Planted pairs: {{ corpus.truth.planted|length }}
""")

EVALUATION_TEMPLATE = Template("""precision={{ "%.4f"|format(evaluation.precision) }} recall={{ "%.4f"|format(evaluation.recall) }}
True positives: {{ evaluation.true_positives }} / planted {{ evaluation.planted }}, predicted {{ evaluation.predicted }}
{% if evaluation.zero_predictions %}No predictions: precision reported as 1.0
{% endif -%}
{% for d in evaluation.false_positives -%}
  false positive  {{ d.course }}  {{ d.harvester }} -> {{ d.master }}  n={{ d.n }} x={{ d.x }} p90={{ d.p90_seconds }}
{% endfor -%}
{% for miss in evaluation.false_negatives -%}
  missed          {{ miss.course }}  {{ miss.harvester }} -> {{ miss.master }}{% if miss.detection %}  rejected by: {{ rejected(miss.detection)|join(', ') }}{% else %}  (not classified){% endif %}
{% endfor -%}
""")

SWEEP_TEMPLATE = Template("""Cutoff sweep over {{ sweep.grid|length }} points (0 to {{ "%g"|format(sweep.grid[-1]) }} s)
{% for g, c in marks -%}
  < {{ "%6g"|format(g) }} s: {{ c }}
{% endfor -%}
""")

REPORT_TEMPLATE = Template("""CAMEO certificates: {{ report.cameo_certificates }} of {{ report.total_certificates }} ({{ "%.2f"|format(100 * report.cameo_fraction_overall) }}%)
Unique CAMEO users: {{ report.unique_cameo_users }}, harvester accounts: {{ report.harvester_accounts }}

Certificate earners with at least one CAMEO certificate:
{% for row in multicert -%}
  >= {{ "%2d"|format(row.min_certificates) }} certificates: {{ row.earners_with_cameo }} / {{ row.earners }} ({{ "%.2f"|format(100 * row.fraction) }}%)
{% endfor -%}
{% if prevention %}
Answer prevention:
{% for row in prevention -%}
  {{ "with   " if row.prevention else "without" }}  courses {{ row.courses }}  typical user {{ "%.2f"|format(100 * row.typical_user_rate) }}%  typical course {{ "%.2f"|format(100 * row.typical_course_rate) }}%
{% endfor -%}
{% endif -%}
{% if offenders %}
Masters with {{ min_certificates }}+ CAMEO certificates:
{% for master, count in offenders -%}
  {{ master }}: {{ count }}
{% endfor -%}
{% endif -%}
{% if recurring %}
Pairs flagged in more than one course:
{% for harvester, master, courses in recurring -%}
  {{ harvester }} -> {{ master }}: {{ courses|join(', ') }}
{% endfor -%}
{% endif -%}
""")


def _rejected_filters(detection) -> List[str]:
    return [name for name, ok in detection.filter_verdicts.model_dump().items() if not ok]


def render_detect_summary(report: AggregateReport, candidates: int) -> str:
    return DETECT_SUMMARY_TEMPLATE.render(report=report, candidates=candidates)


def render_synth_summary(corpus: SyntheticCorpus) -> str:
    labels = list(corpus.truth.labels.values())
    return SYNTH_SUMMARY_TEMPLATE.render(
        corpus=corpus,
        masters=labels.count("cameo-master"),
        harvesters=labels.count("cameo-harvester"),
    )


def render_evaluation(evaluation: EvaluationReport) -> str:
    return EVALUATION_TEMPLATE.render(evaluation=evaluation, rejected=_rejected_filters)


def render_sweep(sweep: SweepResult, every_seconds: float = 300.0) -> str:
    """Cumulative counts at every multiple of `every_seconds` on the grid."""
    marks = [(g, c) for g, c in zip(sweep.grid, sweep.cumulative_detections) if g % every_seconds == 0]
    return SWEEP_TEMPLATE.render(sweep=sweep, marks=marks)


def render_report(report: AggregateReport, multicert: Sequence[MultiCertRow],
                  prevention: Sequence[PreventionRow], offenders: Sequence[Tuple[str, int]],
                  recurring: Sequence[Tuple[str, str, List[str]]], min_certificates: int) -> str:
    return REPORT_TEMPLATE.render(report=report, multicert=multicert, prevention=prevention,
                                  offenders=offenders, recurring=recurring,
                                  min_certificates=min_certificates)
