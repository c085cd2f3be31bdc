"""Community-aware dataset distillation over embedding pools.

Pipeline: build per-class weighted graphs from embeddings, find communities
by minimizing a random-walk codelength, select the highest-centrality items
per community, then train and evaluate a linear classifier on the distilled
subset with a cross-entropy plus boundary-contrastive loss.
"""

from .embedding_io import (EmbeddingSet, FixtureSpec, FormatError,
                           generate_fixture, generate_fixture_planted,
                           read_csv_embeddings, read_embeddings, write_embeddings)
from .graph_builder import (ClassGraph, GraphConfig, build_class_graph,
                            dump_graph, knn_graph, pairwise_inverse_distances,
                            softmax_row_weights, threshold_graph)
from .map_equation import (ConvergenceError, FlowConfig, FlowStats, Partition,
                           codelength, delta_codelength, flow_stats_for_graph,
                           module_flows, transition_matrix, visit_rates)
from .community import OptimizerConfig, detect_communities
from .selection import (DistilledSelection, SelectionMetric, allocate_quotas,
                        distill, flow_score, flow_scores, modular_centrality,
                        modular_centrality_scores, read_selection, select_class,
                        write_selection, write_selection_summary)
from .trainer import (Classifier, LossConfig, class_boundaries,
                      compute_batch_boundaries, contrastive_class_loss,
                      load_classifier, save_classifier, softmax_probabilities,
                      total_loss, train)
from .metrics import (EvalReport, accuracy, binary_auc, evaluate_probabilities,
                      f1_score, macro_f1, macro_ovr_auc, ovr_auc_score,
                      per_class_f1, per_class_ovr_auc)
from .pipeline import (PipelineConfig, holdout_split, holdout_split_indices,
                       run_paired, run_pipeline, run_random_baseline)

__version__ = "0.1.0"
