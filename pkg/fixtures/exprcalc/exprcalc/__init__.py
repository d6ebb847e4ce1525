from .evaluator import evaluate_source
from .parser import parse
