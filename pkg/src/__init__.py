# -*- coding: utf-8 -*-
"""PromptSteer - prompt-steered zero-shot adaptation of a toy detector pipeline"""

__version__ = "1.0.0"
