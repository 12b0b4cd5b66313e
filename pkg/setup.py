#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
wopt 安装脚本
"""

from setuptools import setup, find_packages

# 直接指定版本号，避免读取文件
version = '0.1.0'

# 直接提供描述，避免读取文件
long_description = """
# wopt

wopt 构造一维隐空间下、对经验测度 W1 最优的 K-Lipschitz 分段线性生成器。

## 特性

- **一维精确解**：停留-过渡结构的最优生成器、W1 闭式值、下界 K_1、翻转极小元
- **多维解**：平方步长覆盖路径（闭包 + Held-Karp 精确解、2-opt 启发式）与下界 K_2
- **半离散传输**：加权 Voronoi 胞腔、随机对偶上升求适配权重
- **独立校验**：网络单纯形与分位数耦合计算 W1
- **实验**：收敛速率与 (n, K) 热图，CSV 与 SVG 输出，并行执行
"""

setup(
    name='wopt',
    version=version,
    description='一维隐空间下 W1 最优 Lipschitz 生成器',
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=find_packages(),
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
    ],
    python_requires='>=3.9',
    install_requires=[
        'pyyaml>=5.1',
        'numpy>=1.22',
        'scipy>=1.11',
        'pot>=0.9',
        'pandas>=1.4',
        'matplotlib>=3.5',
    ],
    extras_require={
        'dev': [
            'pytest>=6.0',
            'pytest-cov>=2.10',
            'flake8>=3.8',
        ],
    },
    entry_points={
        'console_scripts': [
            'wopt=wopt.cli:main',
        ],
    },
)
