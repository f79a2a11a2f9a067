import enum
import json

import yaml


class PrintFormat(enum.IntEnum):
    JSON = 1
    YAML = 2
    TABLE = 3

    def __str__(self):
        return self.name.lower()

    def __repr__(self):
        return str(self)

    @staticmethod
    def argparse(s):
        try:
            return PrintFormat[s.upper()]
        except KeyError:
            return s


def print_assignment(dct, format=PrintFormat.TABLE):
    if format is PrintFormat.JSON:
        print(json.dumps(dct, indent=2, sort_keys=True))
    elif format is PrintFormat.YAML:
        print(yaml.dump(dct, default_flow_style=False))
    else:
        print(assignment_table(dct))


def assignment_table(dct):
    ladder = dct.get('ladder')
    levels = dct['assignment']['levels']
    lines = [f"{'row':>4} {'fidelity':>12} {'y':>2} {'reach':>8} {'time':>12}  constraints"]
    for row in dct['rows']:
        i = row['row']
        fidelity = f"{ladder[i]:.6g}" if ladder else '-'
        assigned = ','.join(str(j) for j, level in enumerate(levels) if level == i)
        lines.append(f"{i:>4} {fidelity:>12} {row['y']:>2} {row['reach']:>8.4f} {row['time']:>12.6g}  {assigned}")
    lines.append(f"expected time per evaluation: {dct['expected_time']:.6g}")
    return '\n'.join(lines)
