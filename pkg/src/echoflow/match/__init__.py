"""Finding posts and images that repeat app-sourced content."""

from .image import (
    ImageCluster,
    ImageHash64,
    assign_image,
    cluster_images,
    dbscan_hamming,
    hamming,
    hamming_matrix,
    medoid,
    phash64,
)
from .temporal import FirstPosterStats, TweetPair, first_poster_stats, map_similar_pairs
from .text import (
    MATCH_THRESHOLD,
    TextClusterModel,
    l2_normalize,
    match_corpus,
    match_text,
    preprocess_text,
    train_text_clusters,
    vectorize_corpus,
)
