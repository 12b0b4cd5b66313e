"""
Parser模块 - 配置文件与数据文件解析

此模块提供 YAML/JSON 配置文件的深度合并解析、样本 CSV 的读取，
以及生成器、覆盖路径等 JSON 文档的读写。
"""

import copy
import json
import os

import pandas as pd
import yaml

from .errors import ConfigError, DomainError
from .generator import PiecewiseLinearGenerator


def deep_merge(dict1, dict2):
    """
    将两个字典深度合并

    字典递归合并，列表拼接，其余值由 dict2 覆盖。

    Args:
        dict1 (dict): 第一个字典
        dict2 (dict): 第二个字典

    Returns:
        dict: 合并后的字典
    """
    result = copy.deepcopy(dict1)
    for key, value in dict2.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = deep_merge(result[key], value)
        elif key in result and isinstance(result[key], list) and isinstance(value, list):
            result[key] = result[key] + value
        else:
            result[key] = copy.deepcopy(value)
    return result


def yaml2dict(yaml_files):
    """
    将一个或多个 YAML/JSON 文件解析为字典并依次深度合并

    Args:
        yaml_files (str or list): 单个文件路径或文件路径列表

    Returns:
        dict: 解析并合并后的字典

    Raises:
        ConfigError: 文件不存在、格式错误或顶层不是映射
    """
    if isinstance(yaml_files, str):
        yaml_files = [yaml_files]

    result = {}
    for yaml_file in yaml_files:
        if not os.path.exists(yaml_file):
            raise ConfigError(f"配置文件 {yaml_file} 不存在")
        with open(yaml_file, 'r') as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigError(f"配置文件 {yaml_file} 格式错误: {e}")
        if data is None:
            continue
        if not isinstance(data, dict):
            raise ConfigError(f"配置文件 {yaml_file} 的顶层必须是映射")
        result = deep_merge(result, data)

    return result


def read_points(path, header=False):
    """
    读取样本 CSV，每行一个点，每列一个坐标

    Args:
        path (str): CSV 文件路径
        header (bool): 首行是否为表头

    Returns:
        ndarray: 形状 (n, d) 的样本

    Raises:
        DomainError: 文件为空或含有非数值
    """
    try:
        frame = pd.read_csv(path, header=0 if header else None)
    except pd.errors.EmptyDataError:
        raise DomainError(f"样本文件 {path} 为空")
    if frame.empty:
        raise DomainError(f"样本文件 {path} 为空")
    try:
        return frame.to_numpy(dtype=float)
    except ValueError as e:
        raise DomainError(f"样本文件 {path} 含有非数值: {e}")


def read_json(path):
    """读取 JSON 文档"""
    with open(path, 'r') as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise DomainError(f"JSON 文件 {path} 格式错误: {e}")


def write_json(data, path):
    """把字典写成缩进的 JSON 文档"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(data, f, indent=2)
        f.write("\n")


def read_generator(path):
    """从 JSON 文件读取分段线性生成器（多余的字段被忽略）"""
    return PiecewiseLinearGenerator.from_dict(read_json(path))


def read_masses(path):
    """
    读取目标质量：JSON 列表，或单列 CSV

    Returns:
        list: 质量列表
    """
    if path.endswith(".json"):
        data = read_json(path)
        if isinstance(data, dict):
            data = data.get("alpha")
        if not isinstance(data, list):
            raise DomainError(f"质量文件 {path} 必须是列表或含 alpha 字段的对象")
        return [float(v) for v in data]
    return read_points(path).reshape(-1).tolist()
