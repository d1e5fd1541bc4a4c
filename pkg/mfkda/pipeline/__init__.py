#!/usr/bin/env python
"""Pipeline orchestration: config, manifests, stages and synthetic data"""

from mfkda.pipeline.config import PipelineConfig, load_config  # noqa
from mfkda.pipeline.manifest import (DatasetManifest, load_manifest,  # noqa
                                     select_targets)
from mfkda.pipeline.runner import STAGES, PipelineRun, run_pipeline  # noqa
from mfkda.pipeline.synthetic import (generate_synthetic,  # noqa
                                      synthetic_params, write_synthetic)
