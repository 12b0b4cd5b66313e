"""
Experiments模块 - 收敛速率与 (n, K) 热图实验

此模块提供目标分布、实验配置、输出行，以及：
- run_rates: 对每个 (n, K 规则, 重复) 构造最优生成器，记录闭式 W1 与对目标分布的 W1 估计
- run_heatmap: 一维 (n, K) 网格，K 低于 K_1 时改用固定 K 的一维最优拟合
- estimate_slope: 对数坐标下中位数的最小二乘斜率及自助法置信区间
- emit_outputs: 固定表头的 CSV 与对数坐标折线图 SVG
"""

import hashlib
import logging
import time

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from scipy.stats import norm  # noqa: E402

from .cell import CellStatus, ExperimentCell  # noqa: E402
from .cloud import SampleCloud  # noqa: E402
from .errors import ConfigError, DimensionError, DomainError, ExperimentError  # noqa: E402
from .generator import latent_grid, pushforward_discretize  # noqa: E402
from .measure import DiscreteMeasure  # noqa: E402
from .multivariate import build_gstar_md  # noqa: E402
from .oracle import w1_between  # noqa: E402
from .path_solver import k2_lower_bound, solve_covering_walk  # noqa: E402
from .runner import execute_cells_parallel, get_config_var, get_status_summary, resolve_max_workers  # noqa: E402
from .univariate import (build_gstar_1d, empirical_quantile_grid, fixed_k_optimum_1d,  # noqa: E402
                         grid_function_generator, k1_lower_bound)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["n", "K", "k_lower", "w1_emp", "w1_target", "seed", "ms"]
TARGET_KINDS = ("uniform-interval", "standard-gaussian", "uniform-box")
EXPERIMENT_KINDS = ("rates", "heatmap")
K_MODES = ("multiple", "absolute")

DEFAULTS = {
    "target": {"kind": "uniform-interval", "a": 0.0, "b": 1.0, "dim": 1},
    "dims": None,
    "n_grid": [64, 128, 256, 512],
    "k_rule": {"mode": "multiple", "factors": [2.0]},
    "repetitions": 1,
    "oracle_grid": None,
    "reference_size": None,
    "lp_grid": 2000,
    "seed": 0,
    "output": {},
    "threads": None,
    "continue_on_failure": False,
    "record_time": True,
}

# 维度 >= 2 时网络单纯形的规模随两侧原子数之积增长
ORACLE_GRID_1D = 100_000
ORACLE_GRID_MD = 5_000
REFERENCE_SIZE_1D = 100_000
REFERENCE_SIZE_MD = 5_000


def derive_seed(master, *parts):
    """由主种子与单元坐标派生 63 位种子（与调度顺序无关）"""
    text = ":".join(str(p) for p in (master,) + parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big") >> 1


class TargetDistribution:
    """
    目标分布 mu

    属性:
        kind (str): uniform-interval、standard-gaussian 或 uniform-box
        a (float): 均匀分布的左端点（uniform-box 为每个坐标的下界）
        b (float): 均匀分布的右端点
        dim (int): 维度，一维分布恒为 1
    """

    def __init__(self, kind, a=0.0, b=1.0, dim=1):
        if kind not in TARGET_KINDS:
            raise ConfigError(f"不支持的目标分布: {kind}，可选 {', '.join(TARGET_KINDS)}")
        if kind != "standard-gaussian" and not b > a:
            raise ConfigError(f"均匀分布的区间非法: [{a}, {b}]")
        if kind == "uniform-box" and int(dim) < 1:
            raise ConfigError(f"维度必须 >= 1: {dim}")
        self.kind = kind
        self.a = float(a)
        self.b = float(b)
        self.dim = int(dim) if kind == "uniform-box" else 1

    @classmethod
    def from_dict(cls, data):
        if isinstance(data, str):
            data = {"kind": data}
        if not isinstance(data, dict) or "kind" not in data:
            raise ConfigError(f"目标分布配置必须包含 kind: {data}")
        return cls(data["kind"], data.get("a", 0.0), data.get("b", 1.0), data.get("dim", 1))

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b, "dim": self.dim}

    def with_dim(self, dim):
        """返回维度为 dim 的同类分布（只对 uniform-box 有意义）"""
        if self.kind != "uniform-box" and dim != 1:
            raise ConfigError(f"{self.kind} 只支持 d=1")
        return TargetDistribution(self.kind, self.a, self.b, dim)

    @property
    def is_univariate(self):
        return self.dim == 1

    @property
    def bounded(self):
        return self.kind != "standard-gaussian"

    def quantile(self, p):
        """
        一维分布的分位数函数 F^{-1}

        Raises:
            DimensionError: 多维分布
        """
        if self.kind == "uniform-box" and self.dim != 1:
            raise DimensionError(f"{self.kind}(d={self.dim}) 没有分位数函数")
        p = np.asarray(p, dtype=float)
        if self.kind == "standard-gaussian":
            return norm.ppf(p)
        return self.a + (self.b - self.a) * p

    def sample(self, n, seed):
        """独立同分布抽样，返回形状 (n, d)"""
        if n < 1:
            raise DomainError(f"样本数必须 >= 1: {n}")
        rng = np.random.default_rng(seed)
        if self.kind == "standard-gaussian":
            return rng.standard_normal((n, 1))
        return rng.uniform(self.a, self.b, size=(n, self.dim))

    def reference_measure(self, size, seed=0):
        """
        用于估计 W1(., mu) 的参考测度

        一维分布取分位数网格 F^{-1}((j-1/2)/size)，多维取随机样本。
        """
        if self.is_univariate:
            return DiscreteMeasure.from_points(self.quantile(latent_grid(int(size))))
        return DiscreteMeasure.from_points(self.sample(int(size), seed))

    def __repr__(self):
        return f"TargetDistribution({self.kind}, a={self.a}, b={self.b}, dim={self.dim})"


def sample_target(target, n, seed):
    """
    从目标分布抽取 n 个样本

    Args:
        target (TargetDistribution): 目标分布
        n (int): 样本数
        seed (int): 随机种子

    Returns:
        SampleCloud: 点云；相同 (target, n, seed) 给出相同结果
    """
    return SampleCloud(target.sample(n, seed))


def _geometric_grid(spec):
    start, stop = int(spec["start"]), int(spec["stop"])
    factor = float(spec.get("factor", 2))
    if start < 1 or stop < start or factor <= 1:
        raise ConfigError(f"n 网格参数非法: {spec}")
    grid = []
    value = float(start)
    while int(round(value)) <= stop:
        if not grid or int(round(value)) > grid[-1]:
            grid.append(int(round(value)))
        value *= factor
    return grid


class ExperimentConfig:
    """
    实验配置

    属性:
        kind (str): rates 或 heatmap
        target (TargetDistribution): 目标分布
        dims (list): 维度列表（uniform-box 可多个）
        n_grid (list): 递增的样本数网格
        k_mode (str): multiple 或 absolute
        k_values (list): 倍数或绝对 K
        repetitions (int): 每个单元的重复次数
        oracle_grid (int or None): 隐变量离散化网格；None 表示按维度取默认值
        reference_size (int or None): 参考测度原子数；0 表示不估计 W1(., mu)
        lp_grid (int): 固定 K 一维拟合的网格大小
        seed (int): 主种子
        csv_path (str or None): CSV 输出路径
        svg_path (str or None): SVG 输出路径
        threads (int or None): 线程数
        continue_on_failure (bool): 单元失败时是否继续
        record_time (bool): 是否记录耗时（为 False 时 ms 列为 0，输出逐字节可复现）
    """

    def __init__(self, kind, target, n_grid, k_mode, k_values, repetitions=1, dims=None,
                 oracle_grid=None, reference_size=None, lp_grid=2000, seed=0, csv_path=None,
                 svg_path=None, threads=None, continue_on_failure=False, record_time=True):
        self.kind = kind
        self.target = target
        self.dims = list(dims) if dims else [target.dim]
        self.n_grid = [int(n) for n in n_grid]
        self.k_mode = k_mode
        self.k_values = [float(k) for k in k_values]
        self.repetitions = int(repetitions)
        self.oracle_grid = oracle_grid
        self.reference_size = reference_size
        self.lp_grid = int(lp_grid)
        self.seed = int(seed)
        self.csv_path = csv_path
        self.svg_path = svg_path
        self.threads = threads
        self.continue_on_failure = bool(continue_on_failure)
        self.record_time = bool(record_time)
        self.validate()

    def validate(self):
        """
        检查配置

        Raises:
            ConfigError: 配置不合法
        """
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"未知的实验类型: {self.kind}")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ConfigError(f"n 网格必须非空且为正: {self.n_grid}")
        if any(b <= a for a, b in zip(self.n_grid[:-1], self.n_grid[1:])):
            raise ConfigError(f"n 网格必须严格递增: {self.n_grid}")
        if self.repetitions < 1:
            raise ConfigError(f"重复次数必须 >= 1: {self.repetitions}")
        if self.k_mode not in K_MODES:
            raise ConfigError(f"未知的 K 规则: {self.k_mode}")
        if not self.k_values:
            raise ConfigError("K 规则至少需要一个取值")
        if self.k_mode == "multiple" and any(f < 1 for f in self.k_values):
            raise ConfigError(f"K 倍数必须 >= 1: {self.k_values}")
        if any(k < 0 for k in self.k_values):
            raise ConfigError(f"K 必须非负: {self.k_values}")
        for d in self.dims:
            self.target.with_dim(int(d))
        if self.oracle_grid is not None and int(self.oracle_grid) < max(self.n_grid):
            raise ConfigError(f"oracle_grid={self.oracle_grid} 必须不小于最大样本数 {max(self.n_grid)}")
        if self.reference_size is not None and int(self.reference_size) < 0:
            raise ConfigError(f"reference_size 必须非负: {self.reference_size}")
        if self.lp_grid < 2:
            raise ConfigError(f"lp_grid 必须 >= 2: {self.lp_grid}")
        if self.kind == "heatmap":
            if self.k_mode != "absolute":
                raise ConfigError("热图实验要求 K 规则为 absolute")
            if self.dims != [1]:
                raise ConfigError("热图实验只支持 d=1")

    @classmethod
    def from_dict(cls, data, kind=None):
        """
        由配置字典构造，字段按 <kind>.<name>、defaults.<name>、顶层的顺序查找

        Args:
            data (dict): 合并后的配置字典
            kind (str, optional): 实验类型，缺省时读取 data["kind"]

        Returns:
            ExperimentConfig: 配置对象
        """
        if not isinstance(data, dict):
            raise ConfigError("配置必须是映射")
        kind = kind or data.get("kind")
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"未知的实验类型: {kind}")

        def var(name):
            return get_config_var(data, kind, name, DEFAULTS[name])

        target = TargetDistribution.from_dict(var("target"))
        n_grid = var("n_grid")
        if isinstance(n_grid, dict):
            n_grid = _geometric_grid(n_grid)
        k_rule = var("k_rule")
        if not isinstance(k_rule, dict) or "mode" not in k_rule:
            raise ConfigError(f"k_rule 必须包含 mode: {k_rule}")
        k_mode = k_rule["mode"]
        k_values = k_rule.get("factors") if k_mode == "multiple" else k_rule.get("values")
        output = var("output") or {}
        try:
            return cls(kind, target, n_grid, k_mode, k_values or [],
                       repetitions=var("repetitions"), dims=var("dims"),
                       oracle_grid=var("oracle_grid"), reference_size=var("reference_size"),
                       lp_grid=var("lp_grid"), seed=var("seed"),
                       csv_path=output.get("csv"), svg_path=output.get("svg"),
                       threads=var("threads"), continue_on_failure=var("continue_on_failure"),
                       record_time=var("record_time"))
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"配置字段类型错误: {e}")

    def oracle_grid_for(self, dim):
        if self.oracle_grid is not None:
            return int(self.oracle_grid)
        return max(ORACLE_GRID_1D if dim == 1 else ORACLE_GRID_MD, max(self.n_grid))

    def reference_size_for(self, dim):
        if self.reference_size is not None:
            return int(self.reference_size)
        return REFERENCE_SIZE_1D if dim == 1 else REFERENCE_SIZE_MD

    def k_label(self, value):
        """K 规则的可读标签，同时参与种子派生"""
        if self.k_mode == "multiple":
            return f"{value:g}xK_lower"
        return f"K={value:g}"

    def __repr__(self):
        return (f"ExperimentConfig({self.kind}, {self.target.kind}, dims={self.dims}, "
                f"n={self.n_grid}, {self.k_mode}={self.k_values}, reps={self.repetitions})")


class ExperimentRow:
    """
    实验输出的一行

    属性:
        n (int): 样本数
        K (float): 使用的 Lipschitz 常数
        k_lower (float): K_1 或 K_2
        w1_emp (float): 对经验测度 mu_n 的 W1（闭式值或固定 K 拟合值）
        w1_target (float): 对目标分布 mu 的 W1 估计（未估计时为 NaN）
        seed (int): 样本的种子
        ms (int): 耗时（毫秒）
        label (str): K 规则标签（不写入 CSV）
        dim (int): 维度（不写入 CSV）
        note (str): 估计说明（不写入 CSV）
    """

    def __init__(self, n, K, k_lower, w1_emp, w1_target, seed, ms, label="", dim=1, note=""):
        self.n = int(n)
        self.K = float(K)
        self.k_lower = float(k_lower)
        self.w1_emp = float(w1_emp)
        self.w1_target = float(w1_target)
        self.seed = int(seed)
        self.ms = int(ms)
        self.label = label
        self.dim = dim
        self.note = note

    def to_record(self):
        """按 CSV 列顺序返回字典"""
        return {column: getattr(self, column) for column in CSV_COLUMNS}

    def __repr__(self):
        return (f"ExperimentRow(n={self.n}, K={self.K}, k_lower={self.k_lower}, "
                f"w1_emp={self.w1_emp}, w1_target={self.w1_target})")


def _build_cells(config, dim):
    cells = []
    for n in config.n_grid:
        for value in config.k_values:
            for rep in range(config.repetitions):
                seed = derive_seed(config.seed, dim, n, rep)
                cells.append(ExperimentCell(len(cells), n, config.k_mode, value, rep, seed))
    return cells


def _resolve_k(cell, k_lower):
    if cell.k_mode == "multiple":
        return cell.k_value * k_lower
    return cell.k_value


def _target_estimate(G, context):
    reference = context["reference"]
    if reference is None:
        return float("nan")
    return w1_between(pushforward_discretize(G, context["oracle_grid"]), reference)


def _optimal_generator(cloud, cell, context):
    """返回 (K, K_lower, 生成器, 闭式 W1)"""
    config = context["config"]
    if cloud.d == 1:
        k_lower = k1_lower_bound(cloud)
        K = _resolve_k(cell, k_lower)
        optimum = build_gstar_1d(cloud, K)
        return K, k_lower, optimum.generator, optimum.w1_value
    walk_seed = derive_seed(config.seed, cloud.d, cell.n, config.k_label(cell.k_value), cell.rep)
    walk = solve_covering_walk(cloud, seed=walk_seed)
    k_lower = k2_lower_bound(cloud, walk)
    K = _resolve_k(cell, k_lower)
    optimum = build_gstar_md(cloud, walk, K)
    return K, k_lower, optimum.generator, optimum.w1_value


def _rates_cell(cell, context):
    config = context["config"]
    start = time.perf_counter()
    cloud = sample_target(context["target"], cell.n, cell.seed)
    K, k_lower, G, w1_emp = _optimal_generator(cloud, cell, context)
    w1_target = _target_estimate(G, context)
    ms = (time.perf_counter() - start) * 1000.0 if config.record_time else 0
    row = ExperimentRow(cell.n, K, k_lower, w1_emp, w1_target, cell.seed, ms,
                        label=config.k_label(cell.k_value), dim=cloud.d, note=context["note"])
    logger.info(f"单元 {cell.name} 完成: K={K:.6g}, W1_emp={w1_emp:.6g}, W1_target={w1_target:.6g}")
    return row


def _heatmap_cell(cell, context):
    config = context["config"]
    start = time.perf_counter()
    cloud = sample_target(context["target"], cell.n, cell.seed)
    k_lower = k1_lower_bound(cloud)
    K = cell.k_value
    if K >= k_lower:
        optimum = build_gstar_1d(cloud, K)
        G, w1_emp = optimum.generator, optimum.w1_value
    else:
        q = empirical_quantile_grid(cloud, config.lp_grid)
        w1_emp, g = fixed_k_optimum_1d(q, K)
        G = grid_function_generator(g, K)
    w1_target = _target_estimate(G, context)
    ms = (time.perf_counter() - start) * 1000.0 if config.record_time else 0
    row = ExperimentRow(cell.n, K, k_lower, w1_emp, w1_target, cell.seed, ms,
                        label=config.k_label(K), dim=1, note=context["note"])
    logger.info(f"热图单元 {cell.name} 完成: K_1={k_lower:.6g}, W1_target={w1_target:.6g}")
    return row


def _run_grid(config, execute_func):
    rows = []
    for dim in config.dims:
        target = config.target.with_dim(int(dim))
        reference_size = config.reference_size_for(target.dim)
        reference = None
        note = "W1(., mu) 未估计"
        if reference_size > 0:
            reference = target.reference_measure(reference_size, seed=derive_seed(config.seed, "reference", dim))
            note = f"W1(., mu) 以 {reference_size} 个原子的参考测度估计，偏差 O(N_ref^-1/2)"
        context = {
            "config": config,
            "target": target,
            "reference": reference,
            "oracle_grid": config.oracle_grid_for(target.dim),
            "note": note,
        }
        cells = _build_cells(config, target.dim)
        logger.info(f"开始 {config.kind} 实验: {target}, {len(cells)} 个单元")
        execute_cells_parallel(cells, execute_func, context,
                               max_workers=resolve_max_workers(config.threads),
                               continue_on_failure=config.continue_on_failure)

        summary = get_status_summary(cells)
        logger.info(f"单元状态: {summary}")
        failed = [cell.name for cell in cells if cell.status == CellStatus.FAILED]
        if failed and not config.continue_on_failure:
            first = next(cell for cell in cells if cell.status == CellStatus.FAILED)
            raise ExperimentError(f"{len(failed)} 个单元失败，首个失败 {first.name}: {first.error}", failed=failed)
        rows.extend(cell.result for cell in cells if cell.status == CellStatus.FINISHED)
    return rows


def _output_path(path, dim, dims):
    if path is None or len(dims) == 1:
        return path
    stem, dot, ext = path.rpartition(".")
    return f"{stem}_d{dim}.{ext}" if dot else f"{path}_d{dim}"


def _emit_per_dim(config, rows):
    for dim in config.dims:
        subset = [row for row in rows if row.dim == int(dim)]
        csv_path = _output_path(config.csv_path, dim, config.dims)
        if csv_path:
            emit_outputs(subset, csv_path, _output_path(config.svg_path, dim, config.dims))


def run_rates(config):
    """
    收敛速率实验

    对每个 (n, K 规则, 重复) 抽样、构造最优生成器（d=1 用一维构造，d>1 用覆盖路径构造），
    记录闭式 W1(G#U, mu_n) 以及与参考测度之间的 W1 估计。

    Args:
        config (ExperimentConfig): 配置

    Returns:
        list: ExperimentRow 列表，按 (d, n, K 规则, 重复) 排序

    Raises:
        ExperimentError: 有单元失败且 continue_on_failure 为 False
    """
    rows = _run_grid(config, _rates_cell)
    _emit_per_dim(config, rows)
    return rows


def run_heatmap(config):
    """
    一维 (n, K) 热图实验

    K >= K_1 时使用 G*_K，否则在经验分位数网格上求固定 K 的最优拟合。

    Args:
        config (ExperimentConfig): kind 为 heatmap、K 规则为 absolute 的配置

    Returns:
        list: ExperimentRow 列表
    """
    if config.kind != "heatmap":
        raise ConfigError(f"run_heatmap 需要 heatmap 配置，实际为 {config.kind}")
    rows = _run_grid(config, _heatmap_cell)
    _emit_per_dim(config, rows)
    return rows


class SlopeEstimate:
    """
    对数坐标斜率估计

    属性:
        slope (float): 最小二乘斜率
        intercept (float): 截距
        ci_low (float): 95% 置信区间下界
        ci_high (float): 95% 置信区间上界
    """

    def __init__(self, slope, intercept, ci_low, ci_high):
        self.slope = slope
        self.intercept = intercept
        self.ci_low = ci_low
        self.ci_high = ci_high

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "ci_low": self.ci_low, "ci_high": self.ci_high}

    def __repr__(self):
        return f"SlopeEstimate(slope={self.slope:.4f}, ci=[{self.ci_low:.4f}, {self.ci_high:.4f}])"


def _field(row, name):
    return row[name] if isinstance(row, dict) else getattr(row, name)


def estimate_slope(rows, x_field="n", y_field="w1_target", resamples=1000, seed=0):
    """
    对数坐标下每个 x 的中位数做最小二乘拟合

    置信区间由重复自助法得到：每个 x 的重复值有放回重抽样后重新取中位数并拟合。

    Args:
        rows (list): ExperimentRow 或字典
        x_field (str): 自变量字段
        y_field (str): 因变量字段
        resamples (int): 自助法次数
        seed (int): 随机种子

    Returns:
        SlopeEstimate: 斜率及 95% 置信区间

    Raises:
        DomainError: 不同 x 值少于 4 个，或存在非正数
    """
    groups = {}
    for row in rows:
        x, y = float(_field(row, x_field)), float(_field(row, y_field))
        if not np.isfinite(y):
            continue
        groups.setdefault(x, []).append(y)
    if len(groups) < 4:
        raise DomainError(f"至少需要 4 个不同的 {x_field} 值，实际 {len(groups)} 个")
    xs = np.array(sorted(groups))
    values = [np.array(groups[x]) for x in xs]
    if xs.min() <= 0 or min(v.min() for v in values) <= 0:
        raise DomainError("对数坐标拟合要求数据为正")

    log_x = np.log(xs)
    medians = np.array([np.median(v) for v in values])
    slope, intercept = np.polyfit(log_x, np.log(medians), 1)

    rng = np.random.default_rng(seed)
    boot = np.empty(resamples)
    for b in range(resamples):
        resampled = np.array([np.median(rng.choice(v, size=v.size, replace=True)) for v in values])
        boot[b] = np.polyfit(log_x, np.log(resampled), 1)[0]
    ci_low, ci_high = np.percentile(boot, [2.5, 97.5])
    return SlopeEstimate(float(slope), float(intercept), float(ci_low), float(ci_high))


def _plot_svg(frame, labels, svg_path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in sorted(set(labels)):
        subset = frame[np.array(labels) == label]
        medians = subset.groupby("n")[["w1_emp", "w1_target"]].median()
        ax.plot(medians.index, medians["w1_emp"], marker="o", label=f"{label} vs mu_n")
        if medians["w1_target"].notna().any():
            ax.plot(medians.index, medians["w1_target"], marker="s", linestyle="--", label=f"{label} vs mu")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("W1")
    ax.legend()
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)


def emit_outputs(rows, csv_path, svg_path=None):
    """
    写出 CSV（列固定为 n,K,k_lower,w1_emp,w1_target,seed,ms）和可选的 SVG 对数坐标图

    Args:
        rows (list): ExperimentRow 列表
        csv_path (str): CSV 路径
        svg_path (str, optional): SVG 路径；无数据时不画图

    Raises:
        ConfigError: 路径无法写入
    """
    frame = pd.DataFrame([row.to_record() for row in rows], columns=CSV_COLUMNS)
    try:
        frame.to_csv(csv_path, index=False)
        if svg_path and rows:
            _plot_svg(frame, [row.label for row in rows], svg_path)
    except OSError as e:
        raise ConfigError(f"无法写入输出文件: {e}")
    logger.info(f"已写出 {len(rows)} 行到 {csv_path}")
