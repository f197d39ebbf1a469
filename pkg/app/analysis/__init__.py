from app.analysis.bakry_emery import build_certificate, certificate_text
from app.analysis.functionals import build_records

__all__ = ["build_certificate", "build_records", "certificate_text"]
