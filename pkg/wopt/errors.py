"""
Errors模块 - 异常类型

所有输入校验类异常同时继承 ValueError，保持"非法输入抛出 ValueError"的约定；
内部一致性与收敛类异常继承 RuntimeError。
"""


class WoptError(Exception):
    """wopt 所有异常的基类"""


class DomainError(WoptError, ValueError):
    """参数超出定义域，例如 u 不在 [0,1]、分位数网格未排序、质量不守恒"""


class DimensionError(DomainError):
    """维度不符合要求，例如一维算法收到 d != 1 的样本"""


class ConstraintError(WoptError, ValueError):
    """
    Lipschitz 常数低于构造所需的下界

    属性:
        k_lower (float): 所需的最小 Lipschitz 常数
    """

    def __init__(self, message, k_lower=None):
        super().__init__(message)
        self.k_lower = k_lower


class SizeError(WoptError, ValueError):
    """问题规模超出精确算法或穷举算法的上限"""


class WalkValidationError(WoptError, ValueError):
    """覆盖路径不合法（未覆盖所有样本、相邻重复、代价不一致等）"""


class ConstructionError(WoptError, RuntimeError):
    """构造结果未通过内部一致性检查"""


class ConvergenceError(WoptError, RuntimeError):
    """
    迭代算法在预算内未收敛

    属性:
        residual (float): 最终残差
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(WoptError, ValueError):
    """实验配置不合法，或输出文件无法写入"""


class ExperimentError(WoptError, RuntimeError):
    """
    实验网格中有单元失败

    属性:
        failed (list): 失败单元的名称
    """

    def __init__(self, message, failed=None):
        super().__init__(message)
        self.failed = failed or []
