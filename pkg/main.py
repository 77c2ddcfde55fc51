"""
main.py - Punto de entrada de splitq.

Ejecutar este archivo con un subcomando:
    python main.py search --dataset mnist2 --lambda 0.5
    python main.py provider serve --profile qcp1

Requisitos:
    - Python 3.10+
    - numpy, gymnasium, pandas, matplotlib, tqdm (pip install -r requirements.txt)
"""

import os
import sys

# Asegurar que el directorio del proyecto esté en el path
# para que los imports funcionen correctamente
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from cli.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
