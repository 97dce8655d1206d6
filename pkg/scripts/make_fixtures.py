#!/usr/bin/env python3
"""Regenerate the bundled CMMLU-format fixture files.

Writes one UTF-8 CSV per domain with header ``id,question,A,B,C,D,answer``,
sized to the six-domain experiment subset: machine_learning (20),
college_engineering_hydrology (20), marketing (23), high_school_geography
(12), arts (11), logical (26). Content is synthetic Chinese-language
filler; answer keys are planted with the mock backend's stem rule so the
fixture stays meaningful offline.
"""

from __future__ import annotations

import csv
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from peermatch.backends import mock_correct_label  # noqa: E402

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "peermatch" / "data" / "cmmlu_fixture"

DOMAINS = {
    "machine_learning": {
        "n": 20,
        "topics": ["梯度下降", "决策树剪枝", "交叉验证", "正则化项", "特征缩放", "集成模型", "核技巧", "学习率调度"],
        "stem": "在编号为 {tag} 的受控实验中，研究小组调整了与{topic}相关的设置并记录了验证集表现的变化。关于该变化最合理的解释是哪一项？",
        "options": ["模型容量随之收缩", "数据泄漏被意外引入", "优化过程停在了鞍点附近", "标注噪声主导了误差", "批次统计量失去了代表性", "评估划分本身发生了漂移"],
    },
    "college_engineering_hydrology": {
        "n": 20,
        "topics": ["流域汇流时间", "设计暴雨重现期", "下渗容量曲线", "单位线叠加", "槽蓄方程", "蒸散发估算", "径流系数", "洪峰流量推求"],
        "stem": "某流域观测资料（档案号 {tag}）显示与{topic}有关的指标出现了系统性偏移。依据所给资料，下列哪一项推断能够成立？",
        "options": ["上游调蓄能力显著增强", "测站基准发生了沉降", "土地利用变化改变了产流", "资料系列一致性遭到破坏", "气候波动放大了年际差异", "河道糙率被低估了"],
    },
    "marketing": {
        "n": 23,
        "topics": ["市场细分", "品牌延伸", "渠道冲突", "定价锚点", "顾客生命周期价值", "口碑传播", "促销弹性", "定位陈述"],
        "stem": "案例 {tag} 描述了一家企业围绕{topic}做出的决策及其后续市场反应。结合案例信息，最站得住脚的结论是哪一项？",
        "options": ["目标客群的感知价值被稀释", "竞争者的跟进抵消了差异点", "短期销量以忠诚度为代价", "渠道激励与总体战略错位", "细分依据缺乏可操作性", "传播诉求与购买动机脱节"],
    },
    "high_school_geography": {
        "n": 12,
        "topics": ["季风环流", "河流阶地", "城市热岛", "人口迁移", "洋流分布", "山地垂直带谱", "农业区位", "板块边界"],
        "stem": "读图题 {tag}：图中区域呈现出与{topic}相符的典型特征。据此判断，下列说法正确的是哪一项？",
        "options": ["纬度位置是主导成因", "海陆热力差异起决定作用", "地形抬升改变了局地环流", "人类活动强化了该过程", "洋流性质决定了沿岸差异", "气压带风带的季节移动是关键"],
    },
    "arts": {
        "n": 11,
        "topics": ["透视法", "写意笔墨", "复调结构", "包豪斯设计", "印象派用色", "雕塑的负空间", "戏曲程式", "蒙太奇剪辑"],
        "stem": "鉴赏材料 {tag} 围绕{topic}给出了两段对比描述。依据材料，对创作手法的判断最恰当的是哪一项？",
        "options": ["形式服务于叙事节奏", "媒介特性决定了表现边界", "程式之中保留了即兴余地", "观看位置参与了意义生成", "技法创新回应了时代语境", "留白承担了结构功能"],
    },
    "logical": {
        "n": 26,
        "topics": ["三段论", "充分条件", "归纳概括", "类比推理", "反证法", "概率判断", "预设谬误", "排中律"],
        "stem": "题目 {tag}：一段论证以{topic}为核心展开，并给出了若干前提与一个结论。要使该结论成立，必须补充的假设是哪一项？",
        "options": ["前提之间相互独立", "样本对总体具有代表性", "所述条件既必要又充分", "不存在未被排除的第三种情形", "类比对象在关键属性上一致", "例外情形已被穷尽列举"],
    },
}


def build_rows(domain: str, spec: dict, rng: random.Random) -> list[list[str]]:
    rows = []
    for i in range(spec["n"]):
        tag = f"{domain[:2].upper()}{i:03d}"
        topic = spec["topics"][i % len(spec["topics"])]
        stem = spec["stem"].format(tag=tag, topic=topic)
        option_texts = rng.sample(spec["options"], 4)
        option_texts = [f"{text}（推断{j + 1}）" for j, text in enumerate(option_texts)]
        for text in option_texts:
            assert text not in stem, (domain, i)
        labels = ("A", "B", "C", "D")
        key = mock_correct_label(stem, labels)
        rows.append([str(i), stem, *option_texts, key])
    return rows


def main() -> None:
    rng = random.Random(20240615)
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for domain, spec in DOMAINS.items():
        path = OUT_DIR / f"{domain}.csv"
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["id", "question", "A", "B", "C", "D", "answer"])
            writer.writerows(build_rows(domain, spec, rng))
        print(f"wrote {path} ({spec['n']} rows)")


if __name__ == "__main__":
    main()
