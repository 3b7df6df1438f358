from .forest import ForestModel, ForestParams, RegressionMetrics, TreeNode, fit_forest, fit_tree, importance_mdi, regression_metrics, train_test_split
from .bpnet import BpNetwork, forward, gradient_check, init_network, loss, train_epoch
from .control import ControlModel, build_control_layout, quantify_controls, train_control_model
from .boosting import BoostedModel, BoostParams, best_split, fit_boosted, leaf_weight, predict_proba, softmax_grad_hess, split_gain
from .metrics import ClassificationMetrics, classification_metrics
from .skill import SkillDataset, SkillReport, macro_shares, prune_features, rate_flights

__all__ = [
    "ForestModel", "ForestParams", "RegressionMetrics", "TreeNode",
    "fit_forest", "fit_tree", "importance_mdi", "regression_metrics", "train_test_split",
    "BpNetwork", "forward", "gradient_check", "init_network", "loss", "train_epoch",
    "ControlModel", "build_control_layout", "quantify_controls", "train_control_model",
    "BoostedModel", "BoostParams", "best_split", "fit_boosted", "leaf_weight", "predict_proba",
    "softmax_grad_hess", "split_gain",
    "ClassificationMetrics", "classification_metrics",
    "SkillDataset", "SkillReport", "macro_shares", "prune_features", "rate_flights",
]
