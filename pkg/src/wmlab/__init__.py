"""wmlab: a small, fully deterministic world-model laboratory.

A 2D tabletop manipulation simulator feeds an action-conditioned latent
diffusion model trained from scratch on CPU.  The package covers the whole
pipeline: dataset generation, structure-guided style augmentation, a
convolutional latent codec, diffusion training with a dynamic latent cache
(scheduled replacement of ground-truth context by the model's own cached
predictions), autoregressive rollout, and a quantitative evaluation suite.
"""

__version__ = "0.1.0"
