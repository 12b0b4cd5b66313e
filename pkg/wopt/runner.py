"""
Runner模块 - 实验单元执行

此模块提供实验单元的并行执行、分层配置查找、日志设置和状态统计。
"""

import os
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed

from .cell import CellStatus

# 配置日志记录器
logger = logging.getLogger(__name__)

THREADS_ENV = "WOPT_THREADS"


def _execute_cell_task(cell, execute_func, context):
    """
    执行单元任务（内部方法，用于并行执行）

    Args:
        cell (ExperimentCell): 要执行的单元
        execute_func (callable): 执行函数，接受 cell, context，返回 ExperimentRow
        context (dict): 执行上下文（数据、配置等）

    Returns:
        bool: 执行是否成功
    """
    cell.update_status(CellStatus.RUNNING)
    try:
        cell.result = execute_func(cell, context)
        cell.update_status(CellStatus.FINISHED)
        return True
    except Exception as e:
        logger.error(f"执行单元 {cell.name} 时出错: {e}")
        cell.error = str(e)
        cell.update_status(CellStatus.FAILED)
        raise  # 重新抛出异常，以便在上层捕获


def resolve_max_workers(threads=None):
    """
    确定并行数：环境变量 WOPT_THREADS 优先，其次为配置值，都没有时为 None（由线程池决定）

    Raises:
        ValueError: 环境变量不是正整数
    """
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"环境变量 {THREADS_ENV} 必须是正整数: {env}")
        if value < 1:
            raise ValueError(f"环境变量 {THREADS_ENV} 必须是正整数: {env}")
        return value
    if threads:
        return int(threads)
    return None


def execute_cells_parallel(cells, execute_func, context=None, max_workers=None, continue_on_failure=False):
    """
    并行执行多个单元

    结果按单元编号排序返回，与调度顺序无关。continue_on_failure 为 False 时，
    第一个失败之后尚未开始的单元被取消并标记为 SKIPPED。

    Args:
        cells (list): ExperimentCell 列表
        execute_func (callable): 执行函数，接受 cell, context
        context (dict, optional): 执行上下文
        max_workers (int, optional): 最大并行数
        continue_on_failure (bool): 单元失败时是否继续执行其他单元

    Returns:
        dict: 单元编号到执行结果 (bool) 的映射，按编号排序
    """
    context = context or {}
    results = {}
    if not cells:
        return results

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_cell = {}
        for cell in cells:
            future = executor.submit(_execute_cell_task, cell, execute_func, context)
            future_to_cell[future] = cell

        stop = False
        for future in as_completed(future_to_cell):
            cell = future_to_cell[future]
            if future.cancelled():
                continue
            try:
                results[cell.id] = future.result()
            except Exception as e:
                cell.update_status(CellStatus.FAILED)
                cell.error = cell.error or str(e)
                results[cell.id] = False
                if not continue_on_failure and not stop:
                    logger.warning("检测到单元失败，取消尚未开始的单元")
                    stop = True
                    for other in future_to_cell:
                        other.cancel()

    for future, cell in future_to_cell.items():
        if future.cancelled():
            cell.update_status(CellStatus.SKIPPED)
            results[cell.id] = False

    skipped = [cell.name for cell in cells if cell.status == CellStatus.SKIPPED]
    if skipped:
        logger.warning(f"以下单元未执行: {', '.join(skipped)}")

    return dict(sorted(results.items()))


def get_config_var(config, section, var_name, default=None):
    """
    获取配置变量，按照以下顺序查找：
    1. 实验级别：section.var_name（例如 rates.oracle_grid）
    2. 默认级别：defaults.var_name
    3. 顶层：var_name
    4. 提供的默认值

    Args:
        config (dict): 合并后的配置字典
        section (str): 实验类型（rates 或 heatmap）
        var_name (str): 变量名称
        default: 默认值

    Returns:
        变量值
    """
    for scope in (section, "defaults"):
        try:
            if scope and scope in config and var_name in config[scope]:
                return config[scope][var_name]
        except (KeyError, TypeError):
            pass

    if var_name in config:
        return config[var_name]

    return default


def setup_logging(level=logging.INFO, log_file=None, log_format=None):
    """
    设置 wopt 包的日志记录器

    Args:
        level: 日志级别，默认为 INFO
        log_file: 日志文件路径，如果为 None，则只输出到控制台
        log_format: 日志格式，如果为 None，则使用默认格式

    Returns:
        logging.Logger: wopt 包的根日志记录器
    """
    package_logger = logging.getLogger("wopt")
    package_logger.setLevel(level)

    # 如果没有处理器，添加一个控制台处理器
    if not package_logger.handlers:
        if log_format is None:
            log_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
        formatter = logging.Formatter(log_format)

        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        package_logger.addHandler(console_handler)

        if log_file:
            file_handler = logging.FileHandler(log_file)
            file_handler.setFormatter(formatter)
            package_logger.addHandler(file_handler)

    return package_logger


def get_status_summary(cells):
    """
    获取单元状态摘要

    Args:
        cells (list): ExperimentCell 列表

    Returns:
        dict: 各状态的单元数量
    """
    summary = {status: 0 for status in CellStatus.ALL}
    for cell in cells:
        summary[cell.status] += 1
    return summary
