#!/usr/bin/env python3
"""Saliency Flow — точка входа.

Запуск:
    python main.py make-phantom phantom.pgm --truth truth.pgm --seed 7
    python main.py segment phantom.pgm --scheme quantized --metrics-against truth.pgm
    python main.py --help
"""

import sys
from pathlib import Path

# Добавляем src в путь для прямого запуска
sys.path.insert(0, str(Path(__file__).parent / "src"))

from saliency_flow.cli import main

if __name__ == "__main__":
    sys.exit(main())
