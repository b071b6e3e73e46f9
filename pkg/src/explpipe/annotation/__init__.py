from explpipe.annotation.agreement import AgreementReport, krippendorff_alpha
from explpipe.annotation.exams import create_exam_study, load_exam_fixture
from explpipe.annotation.payloads import (
    FlowViolation,
    attribute_acceptability_correlations,
    encode_absolute_scores,
    validate_payload,
)
from explpipe.annotation.studies import (
    AssignmentError,
    DuplicateJudgmentError,
    QualificationError,
    Study,
    StudyStore,
    aggregate_acceptability_judgments,
)

__all__ = [
    "AgreementReport",
    "attribute_acceptability_correlations",
    "create_exam_study",
    "load_exam_fixture",
    "AssignmentError",
    "DuplicateJudgmentError",
    "FlowViolation",
    "QualificationError",
    "Study",
    "StudyStore",
    "aggregate_acceptability_judgments",
    "encode_absolute_scores",
    "krippendorff_alpha",
    "validate_payload",
]
