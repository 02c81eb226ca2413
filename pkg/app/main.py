import typer

from app.server.commands.campaign import router as CAMPAIGN_COMMANDS
from app.server.config import config
from app.server.logger.custom_logger import logger

app = typer.Typer(name='tuner', help=f'{config.APP_TITLE}: asynchronous Bayesian autotuning of application parameters', no_args_is_help=True, add_completion=False)

# add commands
app.add_typer(CAMPAIGN_COMMANDS)


def print_version(value: bool) -> None:
    if value:
        typer.echo(f'{config.APP_TITLE} {config.APP_VERSION}')
        raise typer.Exit()


@app.callback()
def startup(version: bool = typer.Option(False, '--version', callback=print_version, is_eager=True, help='Show the version and exit')) -> None:
    logger.debug(f'{config.APP_TITLE} {config.APP_VERSION} startup')


if __name__ == '__main__':
    app()
