# -*- coding: utf-8 -*-
"""
PromptSteer - Main Entry Point
Prompt-steered zero-shot detector adaptation pipeline
"""
import sys
import os

# Add path for module imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.cli.dispatcher import dispatch


def main():
    """Main function"""
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
