#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
wopt 命令行接口

此模块提供命令行接口，用于构造最优生成器、求解覆盖路径、计算适配权重、
计算 W1 以及运行速率和热图实验。
"""

import sys
import json
import argparse
import logging

import numpy as np

from .cloud import SampleCloud
from .errors import WoptError
from .experiments import ExperimentConfig, estimate_slope, run_heatmap, run_rates
from .generator import perturb_plateaus
from .multivariate import build_gstar_md
from .oracle import discretization_bias_bound, w1_generator_vs_empirical
from .parser import read_generator, read_masses, read_points, write_json, yaml2dict
from .path_solver import k2_lower_bound, solve_covering_walk
from .runner import setup_logging
from .semidiscrete import adapted_weights, generator_sampler, transit_sampler, uniform_box_sampler
from .univariate import build_gstar_1d, k1_lower_bound

logger = logging.getLogger(__name__)

DEFAULT_PERTURB_M = 100


def main(argv=None):
    """命令行入口点"""
    parser = argparse.ArgumentParser(description='wopt - 一维隐空间下 W1 最优 Lipschitz 生成器')
    parser.add_argument('--verbose', '-v', action='store_true', help='显示详细日志')
    subparsers = parser.add_subparsers(dest='command', help='命令')

    p = subparsers.add_parser('gstar1d', help='构造一维最优生成器')
    p.add_argument('--data', required=True, help='单列样本 CSV')
    p.add_argument('--header', action='store_true', help='CSV 首行为表头')
    p.add_argument('--k', default='auto', help='Lipschitz 常数，auto 表示取 K_1')
    p.add_argument('--out', required=True, help='输出 JSON 路径')

    p = subparsers.add_parser('path', help='求解最小平方步长覆盖路径')
    p.add_argument('--data', required=True, help='样本 CSV，每行一个点')
    p.add_argument('--header', action='store_true', help='CSV 首行为表头')
    group = p.add_mutually_exclusive_group()
    group.add_argument('--exact', action='store_true', help='强制精确求解')
    group.add_argument('--heuristic', action='store_true', help='强制启发式求解')
    p.add_argument('--seed', type=int, default=0, help='启发式随机种子')
    p.add_argument('--out', required=True, help='输出 JSON 路径')

    p = subparsers.add_parser('gstarmd', help='构造多维最优生成器')
    p.add_argument('--data', required=True, help='样本 CSV，每行一个点')
    p.add_argument('--header', action='store_true', help='CSV 首行为表头')
    p.add_argument('--k', default='auto', help='Lipschitz 常数，auto 表示取 K_2')
    p.add_argument('--seed', type=int, default=0, help='启发式随机种子')
    p.add_argument('--out', required=True, help='输出 JSON 路径')

    p = subparsers.add_parser('sdot', help='计算半离散最优传输的适配权重')
    p.add_argument('--atoms', required=True, help='原子 CSV，每行一个点')
    p.add_argument('--header', action='store_true', help='CSV 首行为表头')
    p.add_argument('--target', required=True, help='uniform-box 或 pushforward:gen.json')
    p.add_argument('--m', type=int, default=DEFAULT_PERTURB_M,
                   help='平台扰动参数 m，帐篷高度为 min(K, 1/m) 乘平台长度的一半')
    p.add_argument('--transit-only', action='store_true', help='只使用过渡段上的归一化 G#U，不扰动平台')
    p.add_argument('--alpha', default='uniform', help='uniform 或目标质量文件')
    p.add_argument('--iters', type=int, default=2000, help='迭代次数')
    p.add_argument('--seed', type=int, default=0, help='随机种子')
    p.add_argument('--out', required=True, help='输出 JSON 路径')

    p = subparsers.add_parser('w1', help='计算离散化 G#U 与经验测度之间的 W1')
    p.add_argument('--gen', required=True, help='生成器 JSON')
    p.add_argument('--data', required=True, help='样本 CSV')
    p.add_argument('--header', action='store_true', help='CSV 首行为表头')
    p.add_argument('--grid', type=int, default=100000, help='隐变量网格大小 M')

    for name, help_text in (('rates', '运行收敛速率实验'), ('heatmap', '运行 (n, K) 热图实验')):
        p = subparsers.add_parser(name, help=help_text)
        p.add_argument('--config', '-c', required=True, nargs='+', help='配置文件（YAML/JSON，可多个，依次合并）')

    args = parser.parse_args(argv)

    # 如果没有指定命令，显示帮助信息
    if not args.command:
        parser.print_help()
        sys.exit(1)

    log_level = logging.DEBUG if args.verbose else logging.INFO
    setup_logging(level=log_level)

    commands = {
        'gstar1d': run_gstar1d,
        'path': run_path,
        'gstarmd': run_gstarmd,
        'sdot': run_sdot,
        'w1': run_w1,
        'rates': run_experiment,
        'heatmap': run_experiment,
    }
    try:
        commands[args.command](args)
    except (WoptError, OSError) as e:
        logger.error(str(e))
        print(f"错误: {str(e)}")
        sys.exit(1)


def _parse_k(value):
    if value == 'auto':
        return None
    try:
        return float(value)
    except ValueError:
        raise WoptError(f"--k 必须是 auto 或数值: {value}")


def run_gstar1d(args):
    """构造一维最优生成器并写出 JSON"""
    cloud = SampleCloud(read_points(args.data, header=args.header))
    K = _parse_k(args.k)
    if K is None:
        K = k1_lower_bound(cloud)
    optimum = build_gstar_1d(cloud, K)
    write_json(optimum.to_dict(), args.out)
    print(f"W1 = {optimum.w1_value}, K_1 = {optimum.k_lower}, 已写出 {args.out}")


def _walk_method(args):
    if getattr(args, 'exact', False):
        return 'exact'
    if getattr(args, 'heuristic', False):
        return 'heuristic'
    return 'auto'


def run_path(args):
    """求解覆盖路径并写出 JSON"""
    cloud = SampleCloud(read_points(args.data, header=args.header))
    walk = solve_covering_walk(cloud, method=_walk_method(args), seed=args.seed)
    write_json(walk.to_dict(), args.out)
    print(f"cost = {walk.cost}, k = {walk.k}, exact = {walk.exact}, 已写出 {args.out}")


def run_gstarmd(args):
    """构造多维最优生成器并写出 JSON"""
    cloud = SampleCloud(read_points(args.data, header=args.header))
    walk = solve_covering_walk(cloud, seed=args.seed)
    K = _parse_k(args.k)
    if K is None:
        K = k2_lower_bound(cloud, walk)
    optimum = build_gstar_md(cloud, walk, K)
    write_json(optimum.to_dict(), args.out)
    print(f"W1 = {optimum.w1_value}, K_2 = {optimum.k_lower}, 已写出 {args.out}")


def run_sdot(args):
    """计算适配权重并写出 JSON"""
    atoms = read_points(args.atoms, header=args.header)
    if args.target == 'uniform-box':
        sampler = uniform_box_sampler(atoms.shape[1])
    elif args.target.startswith('pushforward:'):
        G = read_generator(args.target.split(':', 1)[1])
        if args.transit_only:
            sampler = transit_sampler(G)
        else:
            sampler = generator_sampler(perturb_plateaus(G, args.m))
    else:
        raise WoptError(f"未知的目标测度: {args.target}")
    alpha = None if args.alpha == 'uniform' else np.asarray(read_masses(args.alpha))
    vor = adapted_weights(sampler, atoms, alpha, iterations=args.iters, seed=args.seed)
    write_json(vor.to_dict(), args.out)
    print(f"残差 = {vor.residual}, 已写出 {args.out}")


def run_w1(args):
    """打印 W1 与离散化偏差上界"""
    G = read_generator(args.gen)
    cloud = SampleCloud(read_points(args.data, header=args.header))
    value = w1_generator_vs_empirical(G, cloud, args.grid)
    print(json.dumps({"w1": value, "bias_bound": discretization_bias_bound(G, args.grid)}))


def run_experiment(args):
    """运行速率或热图实验，并打印每个 K 规则的斜率"""
    config = ExperimentConfig.from_dict(yaml2dict(args.config), kind=args.command)
    rows = run_rates(config) if args.command == 'rates' else run_heatmap(config)
    print(f"执行完成: {len(rows)} 行")
    if args.command != 'rates':
        return
    for dim, label in sorted({(row.dim, row.label) for row in rows}):
        subset = [row for row in rows if row.label == label and row.dim == dim]
        for field in ('w1_emp', 'w1_target'):
            try:
                estimate = estimate_slope(subset, 'n', field, seed=config.seed)
            except WoptError as e:
                logger.warning(f"d={dim} {label} 的 {field} 斜率无法估计: {e}")
                continue
            print(f"d={dim} {label} {field}: 斜率 {estimate.slope:.4f} "
                  f"[{estimate.ci_low:.4f}, {estimate.ci_high:.4f}]")


if __name__ == '__main__':
    main()
