"""Saliency Flow — нелокальные p-лапласовские реактивные потоки для сегментации."""

__version__ = "0.1.0"
