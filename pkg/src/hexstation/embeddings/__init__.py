from .encoder import Autoencoder, encode, train_encoder
from .neighbourhood import (
    NEIGHBOURHOOD_METHODS,
    NeighbourhoodEmbedder,
    combine_neighbourhood,
    neighbourhood_weights,
    ring_average,
)
from .region import (
    CC_DIM,
    METHODS,
    SA_AXES,
    SA_DIM,
    ConfigError,
    RegionEmbedder,
    embed_region,
)
