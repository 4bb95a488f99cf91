"""HTTP sidecar that serves generation, embedding, and classification models.

The service speaks the same wire protocol the batch pipeline's remote
backend consumes: POST /generate, POST /embed, optional POST /classify,
and GET /health.  Model choice lives entirely in the manifest, so any
causal LM and BERT-style encoder loadable by transformers can be served.
"""

from simaug_sidecar.manifest import GenerationDefaults, ManifestError, ModelManifest
from simaug_sidecar.models import SidecarError, SidecarRuntime, load_runtime
from simaug_sidecar.service import create_app

__version__ = "0.1.0"

__all__ = [
    "GenerationDefaults",
    "ManifestError",
    "ModelManifest",
    "SidecarError",
    "SidecarRuntime",
    "create_app",
    "load_runtime",
]
