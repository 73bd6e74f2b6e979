"""Super-resolved array imaging through strongly scattering media.

The package estimates the sensing matrix of an opaque scattering medium
blindly, from unlabeled sparse-source measurements, and then images
through the medium with resolution far beyond the homogeneous diffraction
limit.  Pipeline stages:

1. `wavefield`  — Foldy-Lax forward model, random media, data generation
2. `sparsedict` — GeLMA sparse coding and MOD-style dictionary learning
3. `cluster`    — DBSCAN consensus over several learned dictionaries
4. `gridorder`  — column-to-grid-point assignment via geodesic MDS
5. `imaging`    — migration imaging, point spreads, stability sweeps
6. `cmx`/`config`/`cli` — interchange format, configuration, pipeline CLI
"""

from .cluster import (ClusterResult, ColumnPool, cluster_count_sweep,
                      collinearity_distance, consensus_dictionary, dbscan,
                      oriented_average)
from .cmx import CmxFormatError, CmxMagicError, CmxSizeError, read_cmx, write_cmx
from .config import ConfigError, ExperimentConfig, config_hash, load_config
from .gridorder import (AlignmentResult, DegenerateEmbeddingError,
                        GeodesicMatrix, GraphDisconnectedError, GridEmbedding,
                        NeighborGraph, OrderingResult, align_with_anchors,
                        assign_to_grid, classical_mds, corner_anchor_indices,
                        correlation_graph, geodesic_distances,
                        grid_index_coordinates, order_columns, smacof_refine)
from .imaging import (Image, ResolutionProfile, StabilityRow,
                      effective_aperture, migrate, off_peak_noise,
                      point_spread, resolution_width, stability_sweep)
from .sparsedict import (Dictionary, GelmaParams, RefineResult,
                         SparseCodes, SparseCodingError, Step1Params,
                         UnderRecoveryError, gelma_solve, match_columns,
                         normalize_columns,
                         prune_dictionary, replace_duplicates, refine_dictionary, sparse_code_all,
                         step1_initialize)
from .wavefield import (ArrayGeometry, DataSet, FoldyLaxSolver, ImageGrid,
                        Medium, NumericalDegeneracyError, SensingMatrix,
                        SourceConfig, assemble_sensing_matrix, centered_grid,
                        generate_dataset, green0, green_vector, green_vectors,
                        linear_array, random_medium, solve_exciting_fields,
                        total_field)

__version__ = "0.1.0"
