"""
Measure模块 - 离散测度

此模块提供 DiscreteMeasure 类，表示 R^d 上有限个原子的概率测度，
用于经验测度 mu_n 和生成器前推测度的离散化。
"""

import numpy as np

from .errors import DomainError

MASS_TOL = 1e-12


class DiscreteMeasure:
    """
    R^d 上的离散概率测度

    属性:
        atoms (ndarray): 原子坐标，形状 (k, d)，合并后两两不同
        masses (ndarray): 原子质量，非负且和为 1
    """

    def __init__(self, atoms, masses, merge=True):
        """
        初始化离散测度

        Args:
            atoms (array_like): 原子坐标，形状 (k, d)；一维输入视为 d=1
            masses (array_like): 原子质量
            merge (bool): 是否合并坐标相同的原子

        Raises:
            DomainError: 质量为负、长度不匹配或总质量不为 1
        """
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms.reshape(-1, 1)
        masses = np.asarray(masses, dtype=float).reshape(-1)
        if atoms.shape[0] != masses.shape[0] or atoms.shape[0] == 0:
            raise DomainError(f"原子数 {atoms.shape[0]} 与质量数 {masses.shape[0]} 不匹配或为空")
        if np.any(masses < 0):
            raise DomainError("质量必须非负")
        total = masses.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise DomainError(f"总质量 {total!r} 偏离 1 超过 {MASS_TOL}")

        if merge:
            atoms, inverse = np.unique(atoms, axis=0, return_inverse=True)
            masses = np.bincount(np.asarray(inverse).reshape(-1), weights=masses,
                                 minlength=atoms.shape[0])

        atoms.flags.writeable = False
        masses.flags.writeable = False
        self.atoms = atoms
        self.masses = masses

    @classmethod
    def from_points(cls, points):
        """
        由等权点列构造测度，相同的点合并并按出现次数计质量

        Args:
            points (array_like): 形状 (M, d) 的点列，每个点质量 1/M

        Returns:
            DiscreteMeasure: 合并后的测度
        """
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        atoms, counts = np.unique(points, axis=0, return_counts=True)
        return cls(atoms, counts / points.shape[0], merge=False)

    @property
    def dim(self):
        """原子所在空间维度"""
        return self.atoms.shape[1]

    @property
    def size(self):
        """原子个数"""
        return self.atoms.shape[0]

    def total_mass(self):
        """返回总质量"""
        return float(self.masses.sum())

    def __repr__(self):
        return f"DiscreteMeasure(size={self.size}, dim={self.dim})"
