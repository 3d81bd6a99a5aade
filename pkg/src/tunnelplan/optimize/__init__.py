from .ipm import IpmOptions, IterationRecord, NlpSolution, Status, solve
from .transcription import NlpProblem, TranscriptionError, Trajectory, nearest_branch, transcribe
from .verify import Check, VerificationReport, verify

__all__ = [
    "Check",
    "IpmOptions",
    "IterationRecord",
    "NlpProblem",
    "NlpSolution",
    "Status",
    "TranscriptionError",
    "Trajectory",
    "VerificationReport",
    "nearest_branch",
    "solve",
    "transcribe",
    "verify",
]
