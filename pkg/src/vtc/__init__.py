"""Training-free compression of video token streams."""
from .config import ArchSpec, CompressionConfig
from .cost import FlopsReport, flops, schedule_from_pipeline
from .errors import VtcError
from .pipeline import RunStats, run
from .scoring import ContributionScores, cls_scores, global_rank, head_average, mean_received_scores
from .synth import SynthVideo, synth_video
from .stc import RetentionResult, compress, dpc_knn, greedy_select, merge_clusters
from .tensor import AttentionTensor, TokenTensor, cosine_matrix, minmax_normalize, pairwise_sq_euclidean, softmax_rows
from .text_merge import MergePlan, plan_merge, text_merge

__version__ = "0.1.0"
