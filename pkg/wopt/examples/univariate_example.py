"""
一维最优生成器示例

此脚本对五个样本构造 G*_K，打印停留区间、原子质量与 W1，并用网络单纯形校验闭式值。
"""

import sys
from pathlib import Path

# 添加父目录到路径，以便导入wopt
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from wopt import SampleCloud, build_gstar_1d, k1_lower_bound
from wopt.oracle import w1_generator_vs_empirical


def main():
    """主函数"""
    cloud = SampleCloud([1.0, 2.0, 4.0, 7.0, 9.0])
    k_lower = k1_lower_bound(cloud)
    print(f"K_1 = {k_lower}")

    for K in (k_lower, 25.0, 100.0):
        optimum = build_gstar_1d(cloud, K)
        print(f"\nK = {K}")
        for (a, b, point), mass in zip(optimum.generator.plateaus(), optimum.atom_masses):
            print(f"  停留 [{a:.4f}, {b:.4f}] -> {point[0]:g}，质量 {mass:.4f}")
        print(f"  过渡质量 {optimum.transit_mass():.4f}")
        print(f"  闭式 W1 = {optimum.w1_value:.6f}")
        print(f"  网络单纯形 W1 = {w1_generator_vs_empirical(optimum.generator, cloud, 20000):.6f}")


if __name__ == "__main__":
    main()
