"""
JAFFNet: joint attention-guided feature fusion network for surface-defect saliency detection
"""
