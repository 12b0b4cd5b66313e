"""
覆盖路径与多维生成器示例

此脚本对星形点云求最小平方步长覆盖路径，比较哈密顿路径的代价，
再构造多维最优生成器并计算适配权重。
"""

import sys
from pathlib import Path

import numpy as np

# 添加父目录到路径，以便导入wopt
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from wopt import ConvergenceError, SampleCloud, build_gstar_md, k2_lower_bound, solve_covering_walk
from wopt.path_solver import brute_force_walk
from wopt.semidiscrete import adapted_weights, transit_sampler


def main():
    """主函数"""
    star = np.array([[0.0, 0.0], [1.0, 0.0], [-0.5, np.sqrt(3) / 2], [-0.5, -np.sqrt(3) / 2]])
    cloud = SampleCloud(star)

    walk = solve_covering_walk(cloud)
    hamiltonian = brute_force_walk(cloud, k_max=0)
    print(f"覆盖路径 {walk.order}，代价 {walk.cost:.4f}")
    print(f"最优哈密顿路径 {hamiltonian.order}，代价 {hamiltonian.cost:.4f}")

    K = 2 * k2_lower_bound(cloud, walk)
    optimum = build_gstar_md(cloud, walk, K)
    print(f"\nK = {K}，W1 = {optimum.w1_value:.6f}")
    for i, mass in enumerate(optimum.atom_masses):
        print(f"  样本 {i} 的停留质量 {mass:.4f}")

    sampler = transit_sampler(optimum.generator)
    try:
        vor = adapted_weights(sampler, star, seed=0)
    except ConvergenceError as e:
        print(f"\n适配权重未收敛，残差 {e.residual:.4f}")
        return
    print(f"\n过渡部分的适配权重 {np.round(vor.weights, 4)}，残差 {vor.residual:.4f}")


if __name__ == "__main__":
    main()
