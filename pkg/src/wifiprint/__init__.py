"""Passive 802.11 device fingerprinting from frame timing and size histograms."""

from .evaluator import (EvaluationConfig, EvaluationReport, build_reference_db, evaluate,
                        report_csv, split_trace)
from .features import ParameterKind, SampleSet, extract_samples, transmission_duration
from .ingest import decode_pcap, end_of_reception, extract_transmitter, read_pcap
from .matcher import SimilarityVector, cosine_similarity, identify, match_candidate, similarity_set
from .signature import (BinningScheme, DeviceSignature, Histogram, ReferenceDatabase, bin_index,
                        build_signature, default_scheme)
from .synthgen import ChannelModel, DeviceProfile, generate, profile_library
from .trace import (CanonicalTrace, DeviceId, FrameRecord, FrameType, FrameTypeKey,
                    parse_canonical, write_canonical)

__version__ = "0.1.0"

__all__ = [
    "BinningScheme", "CanonicalTrace", "ChannelModel", "DeviceId", "DeviceProfile",
    "DeviceSignature", "EvaluationConfig", "EvaluationReport", "FrameRecord", "FrameType",
    "FrameTypeKey", "Histogram", "ParameterKind", "ReferenceDatabase", "SampleSet",
    "SimilarityVector", "bin_index", "build_reference_db", "build_signature",
    "cosine_similarity", "decode_pcap", "default_scheme", "end_of_reception", "evaluate",
    "extract_samples", "extract_transmitter", "generate", "identify", "match_candidate",
    "parse_canonical", "profile_library", "read_pcap", "report_csv", "similarity_set",
    "split_trace", "transmission_duration", "write_canonical",
]
