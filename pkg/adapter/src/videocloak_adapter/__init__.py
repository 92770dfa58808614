"""Reference external encoder process for the videocloak wire protocol.

The mock mode reimplements the builtin pool -> seeded dense projection ->
tanh surrogate from the shared seed construction, so a client talking to
this process gets embeddings matching the in-process encoder to float32
precision. The custom mode mounts any callable that maps an (H, W, 3)
array to a 1-D embedding; gradients are then served by central numerical
differentiation.
"""

from .encoder import MockEncoder, NumericalGradient
from .server import serve

__all__ = ["MockEncoder", "NumericalGradient", "serve"]
__version__ = "0.1.0"
