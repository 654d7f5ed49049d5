import click

from src.entrypoints import data_entrypoint, evaluation_entrypoint, training_entrypoint


@click.group()
@click.version_option(package_name="uncertainty-guided-ssl")
def cli() -> None:
    """Uncertainty guided student-teacher segmentation."""


for entrypoint in (data_entrypoint, training_entrypoint, evaluation_entrypoint):
    for name, command in entrypoint.router.commands.items():
        cli.add_command(command, name)

__all__ = ["cli"]
