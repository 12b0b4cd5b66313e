"""
Cell模块 - 实验网格单元及其状态管理

此模块提供 ExperimentCell 类，表示实验网格中的一个 (n, K 规则, 重复) 单元，
以及 CellStatus 类，定义单元的可能状态。
"""


class CellStatus:
    """单元状态常量"""
    INIT = "init"           # 初始状态
    RUNNING = "running"     # 运行中
    FINISHED = "finished"   # 已完成
    SKIPPED = "skipped"     # 已跳过
    FAILED = "failed"       # 失败

    ALL = (INIT, RUNNING, FINISHED, SKIPPED, FAILED)


class ExperimentCell:
    """
    实验网格中的一个单元

    属性:
        id (int): 单元编号，决定输出顺序
        n (int): 样本数
        k_mode (str): "multiple"（K = factor * K_lower）或 "absolute"
        k_value (float): 倍数或 K 的绝对值
        rep (int): 重复编号
        seed (int): 由主种子派生的单元种子
        status (str): 当前状态，使用 CellStatus 中的常量
        result: 执行结果（ExperimentRow），未完成时为 None
        error (str): 失败原因
    """

    def __init__(self, id, n, k_mode, k_value, rep, seed):
        self.id = id
        self.n = n
        self.k_mode = k_mode
        self.k_value = k_value
        self.rep = rep
        self.seed = seed
        self.status = CellStatus.INIT
        self.result = None
        self.error = None

    @property
    def name(self):
        """用于日志的单元名称"""
        return f"n={self.n},{self.k_mode}={self.k_value},rep={self.rep}"

    def update_status(self, status):
        """
        更新单元状态

        Args:
            status (str): 新状态，使用 CellStatus 中的常量
        """
        if status not in CellStatus.ALL:
            raise ValueError(f"非法的单元状态: {status}")
        self.status = status

    def reset(self):
        """重置为 INIT 并清除结果"""
        self.status = CellStatus.INIT
        self.result = None
        self.error = None

    def __repr__(self):
        return f"ExperimentCell({self.id}, {self.name}, status={self.status})"
