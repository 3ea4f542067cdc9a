"""Hyperspectral pixel clustering via learned sparse features.

The pipeline: learn an overcomplete dictionary online from pixel spectra,
sparse-code every pixel against it, then spectrally cluster the codes.
PCA, NMF and raw-pixel features are included for comparison, scored with
adjusted mutual information against ground truth.
"""

from .baselines import NmfModel, PcaModel, nmf_fit, nmf_transform, pca_fit, pca_transform
from .clustering import (
    AffinityGraph,
    LaplacianMatrix,
    Partition,
    SpectralEmbedding,
    kmeans,
    knn_affinity,
    laplacian,
    reduce_tile_codes,
    spectral_cluster,
    spectral_embed,
)
from .dictionary import (
    OdlState,
    TrainConfig,
    extract_tiles,
    init_dictionary,
    jsr_train,
    odl_step,
    resume,
    suggested_atom_count,
    train,
)
from .errors import (
    DataError,
    DeficientSupportError,
    HsiClustError,
    NumericError,
    ParameterError,
)
from .io import (
    HsiCube,
    LabelMap,
    PixelMatrix,
    codes_from_dense,
    flatten,
    load_codes,
    load_cube,
    load_dictionary,
    load_labels,
    save_codes,
    save_cube,
    save_dictionary,
)
from .metrics import ContingencyTable, ami, contingency, entropy, expected_mi, mutual_information
from .pursuit import Dictionary, SparseCode, SparseCodeMatrix, TileCode, encode_all, omp, somp

__version__ = "0.1.0"
