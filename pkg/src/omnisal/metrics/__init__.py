from .saliency import (EPS, SALIENCY_METRICS, auc_borji, auc_judd, cc, kld, nss,
                       saliency_report, sim)
from .scanpath import SCANPATH_METRICS, align, distance_matrix, hybrid_nss, jarodzka
from .stats import AnovaResult, betainc, f_sf, one_way_anova

__all__ = [
    "EPS", "SALIENCY_METRICS", "SCANPATH_METRICS",
    "auc_borji", "auc_judd", "cc", "kld", "nss", "sim", "saliency_report",
    "align", "distance_matrix", "hybrid_nss", "jarodzka",
    "AnovaResult", "betainc", "f_sf", "one_way_anova",
]
